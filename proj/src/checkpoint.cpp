#include "protoverb/checkpoint.hpp"

#include "protoverb/error.hpp"
#include "protoverb/io.hpp"

namespace protoverb {

using nlohmann::json;

namespace {

json row_major(const Matrix& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
  }
  return out;
}

Matrix from_row_major(const json& values, Eigen::Index rows, Eigen::Index cols, const char* name) {
  if (!values.is_array() || static_cast<Eigen::Index>(values.size()) != rows * cols) {
    fail(ErrorKind::Parse, std::string("checkpoint field '") + name + "' must hold " + std::to_string(rows * cols) +
                               " numbers");
  }
  Matrix m(rows, cols);
  std::size_t i = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = values[i++].get<double>();
  }
  return m;
}

}  // namespace

json checkpoint_to_json(const Checkpoint& ckpt) {
  const auto& model = ckpt.model;
  return json{{"format_version", kCheckpointFormatVersion},
              {"M", model.input_dim()},
              {"D", model.proto_dim()},
              {"K", model.num_classes()},
              {"W", row_major(model.transform)},
              {"P", row_major(model.prototypes)},
              {"labels", ckpt.label_names},
              {"config", ckpt.config}};
}

Checkpoint checkpoint_from_json(const json& j) {
  try {
    if (j.value("format_version", 0) != kCheckpointFormatVersion) {
      fail(ErrorKind::Parse, "unsupported checkpoint format_version " + j.value("format_version", json()).dump());
    }
    const auto m = j.at("M").get<Eigen::Index>();
    const auto d = j.at("D").get<Eigen::Index>();
    const auto k = j.at("K").get<Eigen::Index>();
    if (m < 1 || d < 1 || k < 1) fail(ErrorKind::Parse, "checkpoint dimensions must be positive");
    Checkpoint ckpt;
    ckpt.model.transform = from_row_major(j.at("W"), d, m, "W");
    ckpt.model.prototypes = from_row_major(j.at("P"), k, d, "P");
    ckpt.label_names = j.at("labels").get<std::vector<std::string>>();
    if (static_cast<Eigen::Index>(ckpt.label_names.size()) != k) {
      fail(ErrorKind::Parse, "checkpoint lists " + std::to_string(ckpt.label_names.size()) + " labels for K=" +
                                 std::to_string(k));
    }
    ckpt.config = j.value("config", json::object());
    ckpt.model.validate();
    return ckpt;
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  io::write_atomic(path, checkpoint_to_json(ckpt).dump() + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(io::read_text(path));
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, path.string() + ": " + e.what());
  }
  try {
    return checkpoint_from_json(j);
  } catch (const Error& e) {
    fail(e.kind(), path.string() + ": " + e.what());
  }
}

}  // namespace protoverb
