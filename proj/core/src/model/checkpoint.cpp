#include "safefilter/model/checkpoint.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstring>
#include <stdexcept>

namespace safefilter::model {
namespace {

constexpr char kB64[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string b64_encode(const unsigned char* data, std::size_t len) {
  std::string out;
  out.reserve((len + 2) / 3 * 4);
  for (std::size_t i = 0; i < len; i += 3) {
    unsigned v = data[i] << 16;
    if (i + 1 < len) v |= data[i + 1] << 8;
    if (i + 2 < len) v |= data[i + 2];
    out += kB64[(v >> 18) & 63];
    out += kB64[(v >> 12) & 63];
    out += i + 1 < len ? kB64[(v >> 6) & 63] : '=';
    out += i + 2 < len ? kB64[v & 63] : '=';
  }
  return out;
}

std::vector<unsigned char> b64_decode(const std::string& text) {
  auto value_of = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    if (c == '=') return -1;
    throw std::invalid_argument("checkpoint: invalid base64 character");
  };
  std::vector<unsigned char> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i + 3 < text.size(); i += 4) {
    int a = value_of(text[i]), b = value_of(text[i + 1]);
    int c = value_of(text[i + 2]), d = value_of(text[i + 3]);
    unsigned v = (a << 18) | (b << 12) | (c < 0 ? 0 : c << 6) | (d < 0 ? 0 : d);
    out.push_back((v >> 16) & 0xff);
    if (c >= 0) out.push_back((v >> 8) & 0xff);
    if (d >= 0) out.push_back(v & 0xff);
  }
  return out;
}

bool host_little_endian() {
  const std::uint16_t probe = 1;
  unsigned char byte;
  std::memcpy(&byte, &probe, 1);
  return byte == 1;
}

std::vector<double> vec_to_std(const Vec& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Vec std_to_vec(const std::vector<double>& v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
  return out;
}

nlohmann::json grid_to_json(const value::GridSpec& grid) {
  nlohmann::json j;
  for (const auto& ax : grid.axes) j.push_back({{"lo", ax.lo}, {"hi", ax.hi}, {"points", ax.points}});
  return j;
}

value::GridSpec grid_from_json(const nlohmann::json& j) {
  Vec lo(static_cast<Eigen::Index>(j.size())), hi(static_cast<Eigen::Index>(j.size()));
  std::vector<int> points;
  for (std::size_t d = 0; d < j.size(); ++d) {
    lo[static_cast<Eigen::Index>(d)] = j[d].at("lo").get<double>();
    hi[static_cast<Eigen::Index>(d)] = j[d].at("hi").get<double>();
    points.push_back(j[d].at("points").get<int>());
  }
  return value::GridSpec(lo, hi, points);
}

void check_header(const nlohmann::json& j, const std::string& kind) {
  if (j.value("format", "") != "safefilter-checkpoint" || j.value("version", 0) != 1 ||
      j.value("kind", "") != kind)
    throw std::invalid_argument("checkpoint: expected a version-1 " + kind + " document");
}

}  // namespace

std::string encode_f64(const std::vector<double>& values) {
  static_assert(sizeof(double) == 8);
  std::vector<unsigned char> bytes(values.size() * 8);
  for (std::size_t i = 0; i < values.size(); ++i) {
    unsigned char raw[8];
    std::memcpy(raw, &values[i], 8);
    if (!host_little_endian()) std::reverse(raw, raw + 8);
    std::memcpy(bytes.data() + i * 8, raw, 8);
  }
  return b64_encode(bytes.data(), bytes.size());
}

std::vector<double> decode_f64(const std::string& text) {
  auto bytes = b64_decode(text);
  require(bytes.size() % 8 == 0, "checkpoint: truncated f64 array");
  std::vector<double> out(bytes.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    unsigned char raw[8];
    std::memcpy(raw, bytes.data() + i * 8, 8);
    if (!host_little_endian()) std::reverse(raw, raw + 8);
    std::memcpy(&out[i], raw, 8);
  }
  return out;
}

std::string save_ensemble(const EnsembleModel& model) {
  nlohmann::json j;
  j["format"] = "safefilter-checkpoint";
  j["version"] = 1;
  j["kind"] = "ensemble";
  j["state_dim"] = model.state_dim();
  j["action_dim"] = model.action_dim();
  j["beta"] = model.beta();
  j["sigma_floor"] = model.sigma_floor();
  j["in_shift"] = encode_f64(vec_to_std(model.input_shift()));
  j["in_scale"] = encode_f64(vec_to_std(model.input_scale()));
  j["out_shift"] = encode_f64(vec_to_std(model.target_shift()));
  j["out_scale"] = encode_f64(vec_to_std(model.target_scale()));
  nlohmann::json members = nlohmann::json::array();
  for (const Mlp& net : model.members()) {
    nlohmann::json layers = nlohmann::json::array();
    for (int l = 0; l < net.layer_count(); ++l) {
      const Mat& w = net.weights()[l];
      std::vector<double> flat(w.data(), w.data() + w.size());
      layers.push_back({{"rows", w.rows()},
                        {"cols", w.cols()},
                        {"w", encode_f64(flat)},
                        {"b", encode_f64(vec_to_std(net.biases()[l]))}});
    }
    members.push_back(std::move(layers));
  }
  j["members"] = std::move(members);
  return j.dump(2);
}

EnsembleModel load_ensemble(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  check_header(j, "ensemble");
  const int dx = j.at("state_dim").get<int>();
  const int du = j.at("action_dim").get<int>();
  EnsembleParams params;
  params.members = static_cast<int>(j.at("members").size());
  params.beta = j.at("beta").get<double>();
  params.sigma_floor = j.value("sigma_floor", 1e-6);
  RandomSource scratch_rng(0);
  EnsembleModel model(dx, du, params, scratch_rng);
  model.set_normalization(std_to_vec(decode_f64(j.at("in_shift").get<std::string>())),
                          std_to_vec(decode_f64(j.at("in_scale").get<std::string>())),
                          std_to_vec(decode_f64(j.at("out_shift").get<std::string>())),
                          std_to_vec(decode_f64(j.at("out_scale").get<std::string>())));
  for (std::size_t m = 0; m < j.at("members").size(); ++m) {
    const auto& layers = j.at("members")[m];
    Mlp& net = model.members()[m];
    net.weights().clear();
    net.biases().clear();
    for (const auto& layer : layers) {
      auto flat = decode_f64(layer.at("w").get<std::string>());
      Mat w(layer.at("rows").get<Eigen::Index>(), layer.at("cols").get<Eigen::Index>());
      require(static_cast<Eigen::Index>(flat.size()) == w.size(), "checkpoint: layer size");
      std::memcpy(w.data(), flat.data(), flat.size() * sizeof(double));
      net.weights().push_back(std::move(w));
      net.biases().push_back(std_to_vec(decode_f64(layer.at("b").get<std::string>())));
    }
  }
  model.set_beta(j.at("beta").get<double>());
  return model;
}

std::string save_tabular_policy(const backup::TabularPolicy& policy) {
  nlohmann::json j;
  j["format"] = "safefilter-checkpoint";
  j["version"] = 1;
  j["kind"] = "tabular_policy";
  j["grid"] = grid_to_json(policy.grid());
  j["action_lower"] = encode_f64(vec_to_std(policy.action_box().lower));
  j["action_upper"] = encode_f64(vec_to_std(policy.action_box().upper));
  std::vector<double> flat;
  for (const Vec& u : policy.actions())
    for (Eigen::Index i = 0; i < u.size(); ++i) flat.push_back(u[i]);
  j["action_dim"] = policy.actions().empty() ? 0 : policy.actions().front().size();
  j["actions"] = encode_f64(flat);
  return j.dump(2);
}

backup::TabularPolicy load_tabular_policy(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  check_header(j, "tabular_policy");
  value::GridSpec grid = grid_from_json(j.at("grid"));
  Box action_box(std_to_vec(decode_f64(j.at("action_lower").get<std::string>())),
                 std_to_vec(decode_f64(j.at("action_upper").get<std::string>())));
  auto flat = decode_f64(j.at("actions").get<std::string>());
  const int du = j.at("action_dim").get<int>();
  require(du > 0 && flat.size() == grid.node_count() * static_cast<std::size_t>(du),
          "checkpoint: tabular action table size");
  std::vector<Vec> actions(grid.node_count(), Vec(du));
  for (std::size_t i = 0; i < actions.size(); ++i)
    for (int d = 0; d < du; ++d) actions[i][d] = flat[i * du + d];
  return backup::TabularPolicy(std::move(grid), std::move(actions), std::move(action_box));
}

std::string save_parametric_policy(const backup::ParametricPolicy& policy) {
  nlohmann::json j;
  j["format"] = "safefilter-checkpoint";
  j["version"] = 1;
  j["kind"] = "parametric_policy";
  j["state_dim"] = policy.state_dim();
  j["out_lower"] = encode_f64(vec_to_std(policy.out_box().lower));
  j["out_upper"] = encode_f64(vec_to_std(policy.out_box().upper));
  j["rbf_gamma"] = policy.rbf_gamma();
  std::vector<double> centers;
  for (const Vec& c : policy.rbf_centers())
    for (Eigen::Index i = 0; i < c.size(); ++i) centers.push_back(c[i]);
  j["rbf_centers"] = encode_f64(centers);
  j["params"] = encode_f64(vec_to_std(policy.params()));
  return j.dump(2);
}

backup::ParametricPolicy load_parametric_policy(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  check_header(j, "parametric_policy");
  const int dx = j.at("state_dim").get<int>();
  Box out_box(std_to_vec(decode_f64(j.at("out_lower").get<std::string>())),
              std_to_vec(decode_f64(j.at("out_upper").get<std::string>())));
  auto centers_flat = decode_f64(j.at("rbf_centers").get<std::string>());
  require(dx > 0 && centers_flat.size() % static_cast<std::size_t>(dx) == 0,
          "checkpoint: rbf center table size");
  std::vector<Vec> centers;
  for (std::size_t i = 0; i < centers_flat.size() / dx; ++i) {
    Vec c(dx);
    for (int d = 0; d < dx; ++d) c[d] = centers_flat[i * dx + d];
    centers.push_back(std::move(c));
  }
  backup::ParametricPolicy policy(dx, std::move(out_box), std::move(centers),
                                  j.at("rbf_gamma").get<double>());
  policy.set_params(std_to_vec(decode_f64(j.at("params").get<std::string>())));
  return policy;
}

std::string save_value_grid(const value::GridValueFunction& v) {
  nlohmann::json j;
  j["format"] = "safefilter-checkpoint";
  j["version"] = 1;
  j["kind"] = "value_grid";
  j["grid"] = grid_to_json(v.grid());
  j["values"] = encode_f64(v.values());
  return j.dump(2);
}

value::GridValueFunction load_value_grid(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  check_header(j, "value_grid");
  return value::GridValueFunction(grid_from_json(j.at("grid")),
                                  decode_f64(j.at("values").get<std::string>()));
}

}  // namespace safefilter::model
