#include "resources.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace beaconsim::resources {

namespace {

bool is_prime(std::int64_t n) {
  if (n < 2) return false;
  for (std::int64_t d = 2; d * d <= n; ++d)
    if (n % d == 0) return false;
  return true;
}

void require_positive(std::int64_t v, const char* name) {
  if (v < 1) throw std::invalid_argument(std::string(name) + " must be at least 1");
}

// Table durations carry 10 ns resolution; a sample count is consistent with
// its duration when they agree to within half of that.
constexpr std::int64_t kDurationToleranceNs = 5;

void check_duration(std::int64_t samples, std::int64_t duration_ns, std::int64_t sample_rate_hz,
                    const char* name) {
  const std::int64_t lhs = samples * 1'000'000'000;
  const std::int64_t rhs = duration_ns * sample_rate_hz;
  if (std::abs(lhs - rhs) > kDurationToleranceNs * sample_rate_hz)
    throw std::invalid_argument(std::string(name) + ": sample count and duration disagree");
}

std::string format_ns_as_us(std::int64_t ns) {
  std::string frac = std::to_string(ns % 1000);
  frac.insert(0, 3 - frac.size(), '0');
  while (!frac.empty() && frac.back() == '0') frac.pop_back();
  std::string out = std::to_string(ns / 1000);
  if (!frac.empty()) out += "." + frac;
  return out;
}

}  // namespace

BeaconChannel ResourceGrid::channel(int index) const {
  if (index < 0 || index >= m_sys) throw std::out_of_range("channel index out of range");
  const auto berbs = static_cast<int>(params.n_berb);
  const auto shifts = static_cast<int>(params.n_shifts);
  const int s = index / berbs;
  return {index % berbs, {s / shifts, s % shifts}};
}

int ResourceGrid::channel_index(int berb, radio::SequenceId seq) const {
  if (berb < 0 || berb >= params.n_berb || seq.root < 0 || seq.root >= params.n_roots ||
      seq.shift < 0 || seq.shift >= params.n_shifts)
    throw std::out_of_range("beacon resource out of range");
  const int s = seq.root * static_cast<int>(params.n_shifts) + seq.shift;
  return s * static_cast<int>(params.n_berb) + berb;
}

std::vector<BeaconResource> ResourceGrid::occasion(int phase) const {
  std::vector<BeaconResource> out;
  out.reserve(static_cast<std::size_t>(m_sys));
  for (int c = 0; c < m_sys; ++c) {
    const auto ch = channel(c);
    out.push_back({phase, ch.berb, ch.seq});
  }
  return out;
}

int ResourceGrid::min_period() const {
  const auto f = params.occasions_per_second;
  const auto r = params.max_beacon_rate_hz;
  return static_cast<int>((f + r - 1) / r);
}

ResourceGrid dimension(const DimensioningParams& p) {
  require_positive(p.system_bandwidth_hz, "system_bandwidth");
  require_positive(p.subcarrier_spacing_hz, "subcarrier_spacing");
  require_positive(p.sequence_length, "sequence_length");
  require_positive(p.n_berb, "n_berb");
  require_positive(p.n_roots, "n_roots");
  require_positive(p.n_shifts, "n_shifts");
  require_positive(p.n_seq, "n_seq");
  require_positive(p.t_seq_ns, "t_seq");
  require_positive(p.occasions_per_second, "occasions_per_second");
  require_positive(p.max_beacon_rate_hz, "max_beacon_rate");
  if (p.n_scp < 0 || p.n_sgt < 0 || p.t_scp_ns < 0 || p.t_sgt_ns < 0)
    throw std::invalid_argument("prefix and guard lengths must be non-negative");
  if (is_prime(p.sequence_length) && p.n_roots > p.sequence_length - 1)
    throw std::invalid_argument("a prime-length sequence has at most N_Z - 1 roots");

  ResourceGrid g;
  g.params = p;
  g.sample_rate_hz = p.subcarrier_spacing_hz * p.n_seq;
  check_duration(p.n_seq, p.t_seq_ns, g.sample_rate_hz, "sequence");
  check_duration(p.n_scp, p.t_scp_ns, g.sample_rate_hz, "cyclic prefix");
  check_duration(p.n_sgt, p.t_sgt_ns, g.sample_rate_hz, "guard time");

  g.b_seq_hz = p.sequence_length * p.subcarrier_spacing_hz;
  if (p.n_berb * g.b_seq_hz > p.system_bandwidth_hz)
    throw std::invalid_argument("beacon resource blocks exceed the system bandwidth");

  g.m_seq = p.n_roots * p.n_shifts;
  g.m_sys = p.n_berb * g.m_seq;
  g.n_be = p.n_scp + p.n_seq + p.n_sgt;
  g.t_be_ns = p.t_scp_ns + p.t_seq_ns + p.t_sgt_ns;
  g.capacity_per_second = g.m_sys * p.occasions_per_second;
  return g;
}

std::string dimension_table(const ResourceGrid& g) {
  const auto& p = g.params;
  std::ostringstream os;
  auto row = [&](const std::string& name, const std::string& value) {
    os << name;
    for (std::size_t i = name.size(); i < 36; ++i) os << ' ';
    os << value << '\n';
  };
  row("quantity", "value");
  row("system bandwidth B_sys (Hz)", std::to_string(p.system_bandwidth_hz));
  row("subcarrier spacing (Hz)", std::to_string(p.subcarrier_spacing_hz));
  row("sequence length N_Z", std::to_string(p.sequence_length));
  row("sequence bandwidth B_SEQ (Hz)", std::to_string(g.b_seq_hz));
  row("beacon resource blocks N_BeRB", std::to_string(p.n_berb));
  row("root sequences |q|", std::to_string(p.n_roots));
  row("cyclic shifts per root", std::to_string(p.n_shifts));
  row("sequences per BeRB M_SEQ", std::to_string(g.m_seq));
  row("sequences per occasion M_sys", std::to_string(g.m_sys));
  row("sample rate (Hz)", std::to_string(g.sample_rate_hz));
  row("N_SCP + N_SEQ + N_SGT", std::to_string(p.n_scp) + " + " + std::to_string(p.n_seq) +
                                   " + " + std::to_string(p.n_sgt));
  row("beacon samples N_Be", std::to_string(g.n_be));
  row("beacon duration T_Be (us)", format_ns_as_us(g.t_be_ns));
  row("occasions per second", std::to_string(p.occasions_per_second));
  row("max beacon rate (Hz)", std::to_string(p.max_beacon_rate_hz));
  row("beacons per second (no reuse)", std::to_string(g.capacity_per_second));
  return os.str();
}

std::string to_string(EntityKey key) {
  return (key.is_group() ? "group:" : "ue:") + std::to_string(key.id);
}

Allocator::Allocator(ResourceGrid grid, double reuse_distance_m, Torus torus)
    : grid_(std::move(grid)),
      reuse_distance_(reuse_distance_m),
      torus_(torus),
      occupants_(static_cast<std::size_t>(grid_.m_sys)) {
  if (!(reuse_distance_m > 0.0)) throw std::invalid_argument("reuse distance must be positive");
}

bool Allocator::conflicts(Position a, Position b) const {
  if (!reuse_enabled()) return true;
  return torus_.distance(a, b) < reuse_distance_;
}

int Allocator::pick_channel(std::span<const EntityKey> placed_neighbours) const {
  const int n = grid_.channels();
  std::vector<int> conflict(static_cast<std::size_t>(n), 0);
  if (reuse_enabled()) {
    for (EntityKey k : placed_neighbours) ++conflict[static_cast<std::size_t>(assignments_.at(k).channel)];
  } else {
    for (int c = 0; c < n; ++c)
      conflict[static_cast<std::size_t>(c)] = static_cast<int>(occupants_[static_cast<std::size_t>(c)].size());
  }
  int best = 0;
  for (int c = 1; c < n; ++c) {
    const auto cu = static_cast<std::size_t>(c);
    const auto bu = static_cast<std::size_t>(best);
    if (conflict[cu] < conflict[bu] ||
        (conflict[cu] == conflict[bu] && occupants_[cu].size() < occupants_[bu].size()))
      best = c;
  }
  return best;
}

void Allocator::recolour(int channel) {
  auto& occ = occupants_[static_cast<std::size_t>(channel)];
  std::vector<int> colour(occ.size(), 0);
  int used = 0;
  for (std::size_t i = 0; i < occ.size(); ++i) {
    const Position pi = assignments_.at(occ[i]).position;
    std::vector<bool> taken(static_cast<std::size_t>(used) + 1, false);
    for (std::size_t j = 0; j < i; ++j)
      if (conflicts(pi, assignments_.at(occ[j]).position))
        taken[static_cast<std::size_t>(colour[j])] = true;
    int c = 0;
    while (taken[static_cast<std::size_t>(c)]) ++c;
    colour[i] = c;
    used = std::max(used, c + 1);
  }
  const int period = std::max(used, grid_.min_period());
  const auto ch = grid_.channel(channel);
  const double rate = static_cast<double>(grid_.params.occasions_per_second) / period;
  for (std::size_t i = 0; i < occ.size(); ++i) {
    auto& a = assignments_.at(occ[i]);
    a.channel = channel;
    a.period = period;
    a.resource = {colour[i], ch.berb, ch.seq};
    a.rate_hz = rate;
  }
}

void Allocator::allocate(std::span<const Entity> entities) {
  std::vector<EntityKey> keys;
  keys.reserve(entities.size());
  for (const auto& e : entities) keys.push_back(e.key);
  std::sort(keys.begin(), keys.end());
  if (const auto dup = std::adjacent_find(keys.begin(), keys.end()); dup != keys.end())
    throw std::invalid_argument("duplicate entity " + to_string(*dup));
  assignments_.clear();
  for (auto& o : occupants_) o.clear();
  const std::size_t n = entities.size();

  std::vector<std::vector<std::uint32_t>> nbr(n);
  if (reuse_enabled()) {
    // Uniform bucket grid with cells at least one reuse distance wide.
    const int cx = std::max(1, static_cast<int>(std::floor(torus_.width() / reuse_distance_)));
    const int cy = std::max(1, static_cast<int>(std::floor(torus_.height() / reuse_distance_)));
    if (cx < 3 || cy < 3) {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
          if (conflicts(entities[i].position, entities[j].position)) {
            nbr[i].push_back(static_cast<std::uint32_t>(j));
            nbr[j].push_back(static_cast<std::uint32_t>(i));
          }
    } else {
      std::vector<std::vector<std::uint32_t>> cells(static_cast<std::size_t>(cx * cy));
      auto cell_of = [&](Position p) {
        const Position w = torus_.wrap(p);
        int ix = std::min(cx - 1, static_cast<int>(w.x / torus_.width() * cx));
        int iy = std::min(cy - 1, static_cast<int>(w.y / torus_.height() * cy));
        return std::pair{ix, iy};
      };
      for (std::size_t i = 0; i < n; ++i) {
        auto [ix, iy] = cell_of(entities[i].position);
        cells[static_cast<std::size_t>(iy * cx + ix)].push_back(static_cast<std::uint32_t>(i));
      }
      for (std::size_t i = 0; i < n; ++i) {
        auto [ix, iy] = cell_of(entities[i].position);
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int jx = (ix + dx + cx) % cx;
            const int jy = (iy + dy + cy) % cy;
            for (std::uint32_t j : cells[static_cast<std::size_t>(jy * cx + jx)])
              if (j != i && conflicts(entities[i].position, entities[j].position))
                nbr[i].push_back(j);
          }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (nbr[a].size() != nbr[b].size()) return nbr[a].size() > nbr[b].size();
    return entities[a].key < entities[b].key;
  });

  std::vector<bool> placed(n, false);
  std::vector<EntityKey> placed_nbrs;
  for (std::size_t i : order) {
    const auto& e = entities[i];
    placed_nbrs.clear();
    for (std::uint32_t j : nbr[i])
      if (placed[j]) placed_nbrs.push_back(entities[j].key);
    const int c = pick_channel(placed_nbrs);
    Assignment a;
    a.entity = e.key;
    a.channel = c;
    a.position = torus_.wrap(e.position);
    assignments_.emplace(e.key, a);
    occupants_[static_cast<std::size_t>(c)].push_back(e.key);
    placed[i] = true;
  }
  for (int c = 0; c < grid_.channels(); ++c)
    if (!occupants_[static_cast<std::size_t>(c)].empty()) recolour(c);
}

const Assignment& Allocator::reassign(EntityKey key, Position position) {
  if (assignments_.count(key)) release(key);
  std::vector<EntityKey> nbrs;
  const Position p = torus_.wrap(position);
  if (reuse_enabled())
    for (const auto& [k, a] : assignments_)
      if (conflicts(p, a.position)) nbrs.push_back(k);
  const int c = pick_channel(nbrs);
  Assignment a;
  a.entity = key;
  a.channel = c;
  a.position = p;
  assignments_.emplace(key, a);
  occupants_[static_cast<std::size_t>(c)].push_back(key);
  recolour(c);
  return assignments_.at(key);
}

void Allocator::release(EntityKey key) {
  auto it = assignments_.find(key);
  if (it == assignments_.end()) throw std::out_of_range("no assignment for " + to_string(key));
  auto& occ = occupants_[static_cast<std::size_t>(it->second.channel)];
  occ.erase(std::find(occ.begin(), occ.end(), key));
  assignments_.erase(it);
}

const Assignment* Allocator::find(EntityKey key) const {
  auto it = assignments_.find(key);
  return it == assignments_.end() ? nullptr : &it->second;
}

double Allocator::aggregate_rate_hz() const {
  double sum = 0.0;
  for (const auto& [k, a] : assignments_) sum += a.rate_hz;
  return sum;
}

}  // namespace beaconsim::resources
