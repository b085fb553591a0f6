#include <numeric>

#include "lews/manifest.hpp"
#include "lews/neural.hpp"

namespace lews {

namespace {
constexpr const char* kCheckpointFormat = "lews.checkpoint";
}

void write_checkpoint(const ModelParams<float>& params, const std::filesystem::path& path) {
  if (!params.all_finite()) throw ValidationError("checkpoint: parameters contain non-finite values");
  Manifest m;
  m.set("format", kCheckpointFormat);
  m.set("version", 1);
  m.set("seed", std::to_string(params.seed));
  params.config.write(m, "encoder.");
  m.set("dtype", "float32le");
  m.set("layout", "tensor,column-major");
  m.set("tensors", static_cast<std::int64_t>(params.size()));
  std::vector<float> payload;
  payload.reserve(static_cast<std::size_t>(params.parameter_count()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& t = params.tensors[i];
    m.set("tensor." + std::to_string(i),
          params.names[i] + " " + std::to_string(t.rows()) + " " + std::to_string(t.cols()));
    payload.insert(payload.end(), t.data(), t.data() + t.size());
  }
  const auto payload_path = payload_path_for(path);
  m.set("payload", payload_path.filename().string());
  write_f32le(payload_path, payload);
  m.write(path);
}

ModelParams<float> read_checkpoint(const std::filesystem::path& path) {
  const Manifest m = Manifest::read(path);
  if (m.get("format") != kCheckpointFormat) throw IoError(path.string() + ": not a checkpoint");
  if (m.get_int("version") != 1 || m.get("dtype") != "float32le") {
    throw IoError(path.string() + ": unsupported checkpoint encoding");
  }
  ModelParams<float> p;
  try {
    p.seed = std::stoull(m.get("seed"));
  } catch (const std::exception&) {
    throw IoError(path.string() + ": bad seed");
  }
  p.config = EncoderConfig::read(m, "encoder.");
  const auto count = m.get_int("tensors");
  std::vector<std::pair<int, int>> shapes;
  std::size_t total = 0;
  for (std::int64_t i = 0; i < count; ++i) {
    const auto parts = split(m.get("tensor." + std::to_string(i)), ' ');
    if (parts.size() != 3) throw IoError(path.string() + ": malformed tensor entry " + std::to_string(i));
    p.names.push_back(parts[0]);
    const int rows = std::stoi(parts[1]);
    const int cols = std::stoi(parts[2]);
    shapes.emplace_back(rows, cols);
    total += static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  }
  const auto payload_path = path.parent_path() / m.get("payload");
  const auto values = read_f32le(payload_path);
  if (values.size() != total) {
    throw IoError(path.string() + ": payload length mismatch (" + std::to_string(values.size()) + " words, expected " +
                  std::to_string(total) + ")");
  }
  std::size_t offset = 0;
  for (const auto& [rows, cols] : shapes) {
    nn::Matrix<float> t = Eigen::Map<const nn::Matrix<float>>(values.data() + offset, rows, cols);
    offset += static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
    p.tensors.push_back(std::move(t));
  }
  if (!p.all_finite()) throw ValidationError(path.string() + ": checkpoint holds non-finite values");
  const ParamLayout layout = ParamLayout::make(p.config);
  if (layout.specs.size() != p.size()) throw IoError(path.string() + ": tensor count does not match encoder config");
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto& spec = layout.specs[i];
    if (spec.name != p.names[i] || spec.rows != p.tensors[i].rows() || spec.cols != p.tensors[i].cols()) {
      throw IoError(path.string() + ": tensor '" + p.names[i] + "' does not match the encoder layout");
    }
  }
  return p;
}

}  // namespace lews
