#include "safefilter/model/replay_buffer.hpp"

#include "safefilter/harness/csv.hpp"

#include <istream>
#include <ostream>

namespace safefilter::model {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  require(capacity_ > 0, "ReplayBuffer: capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
  if (data_.size() == capacity_) data_.pop_front();
  data_.push_back(std::move(t));
}

std::vector<std::size_t> ReplayBuffer::bootstrap_indices(RandomSource& rng) const {
  std::vector<std::size_t> idx(data_.size());
  for (auto& i : idx) i = rng.uniform_index(data_.size());
  return idx;
}

void ReplayBuffer::write_csv(std::ostream& out) const {
  using harness::format_double;
  if (data_.empty()) return;
  const auto dx = data_.front().x.size();
  const auto du = data_.front().u.size();
  std::vector<std::string> header;
  for (Eigen::Index i = 0; i < dx; ++i) header.push_back("x_" + std::to_string(i));
  for (Eigen::Index i = 0; i < du; ++i) header.push_back("u_" + std::to_string(i));
  for (Eigen::Index i = 0; i < dx; ++i) header.push_back("xp_" + std::to_string(i));
  out << harness::join_csv_row(header);
  for (const Transition& t : data_) {
    std::vector<std::string> row;
    for (Eigen::Index i = 0; i < dx; ++i) row.push_back(format_double(t.x[i]));
    for (Eigen::Index i = 0; i < du; ++i) row.push_back(format_double(t.u[i]));
    for (Eigen::Index i = 0; i < dx; ++i) row.push_back(format_double(t.xp[i]));
    out << harness::join_csv_row(row);
  }
}

ReplayBuffer ReplayBuffer::read_csv(std::istream& in, std::size_t capacity) {
  ReplayBuffer buf(capacity);
  std::string line;
  if (!std::getline(in, line)) return buf;
  auto header = harness::split_csv_row(line);
  int dx = 0, du = 0;
  for (const auto& h : header) {
    if (h.rfind("x_", 0) == 0) ++dx;
    else if (h.rfind("u_", 0) == 0) ++du;
  }
  require(dx > 0, "ReplayBuffer::read_csv: malformed header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = harness::split_csv_row(line);
    require(static_cast<int>(f.size()) == 2 * dx + du, "ReplayBuffer::read_csv: bad row width");
    Transition t{Vec(dx), Vec(du), Vec(dx)};
    int k = 0;
    for (int i = 0; i < dx; ++i) t.x[i] = std::stod(f[k++]);
    for (int i = 0; i < du; ++i) t.u[i] = std::stod(f[k++]);
    for (int i = 0; i < dx; ++i) t.xp[i] = std::stod(f[k++]);
    buf.push(std::move(t));
  }
  return buf;
}

}  // namespace safefilter::model
