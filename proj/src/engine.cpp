#include "engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>

#include <boost/math/distributions/students_t.hpp>

namespace beaconsim::engine {

namespace {

Tick whole_ticks(double seconds, double tick, const char* what) {
  const double n = seconds / tick;
  const double r = std::round(n);
  if (std::abs(n - r) > 1e-9 * std::max(1.0, r))
    throw std::invalid_argument(std::string(what) + " is not a whole number of ticks");
  return static_cast<Tick>(r);
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double unit(std::uint64_t x) { return static_cast<double>(x >> 11) * 0x1.0p-53; }

}  // namespace

void Scenario::validate() const {
  deployment.validate();
  channel.validate();
  detection.validate();
  protocol.validate();
  resources::dimension(dimensioning);
  if (detection.sequence_length != dimensioning.sequence_length)
    throw std::invalid_argument("detection and dimensioning sequence lengths differ");
  if (!(reuse_distance_m > 0.0)) throw std::invalid_argument("reuse distance must be positive");
  if (!std::isfinite(tx_power_dbm)) throw std::invalid_argument("tx power must be finite");
  if (!(duration_s > 0.0)) throw std::invalid_argument("duration must be positive");
  if (!(warmup_s >= 0.0) || warmup_s > duration_s)
    throw std::invalid_argument("warmup must lie within the duration");
  if (dimensioning.occasions_per_second < dimensioning.max_beacon_rate_hz)
    throw std::invalid_argument("tick exceeds the beacon interval");
  if (ticks_per_period() < 1) throw std::invalid_argument("scheduling period shorter than a tick");
  if (ticks_per_rotation() < 1) throw std::invalid_argument("rotation period shorter than a tick");
  total_ticks();
  warmup_ticks();
  if (replications < 1) throw std::invalid_argument("need at least one replication");
  if (threads < 1) throw std::invalid_argument("need at least one thread");
  if (forced_p_md && !(*forced_p_md >= 0.0 && *forced_p_md <= 1.0))
    throw std::invalid_argument("forced miss-detection probability must lie in [0,1]");
  if (!fixed_positions.empty()) {
    if (deployment.grouping != mobility::Grouping::individual)
      throw std::invalid_argument("fixed positions need the individual scheme");
    if (fixed_positions.size() != static_cast<std::size_t>(deployment.n_users))
      throw std::invalid_argument("fixed positions must cover every user");
  }
}

double Scenario::tick_s() const { return 1.0 / static_cast<double>(dimensioning.occasions_per_second); }
Tick Scenario::total_ticks() const { return whole_ticks(duration_s, tick_s(), "duration"); }
Tick Scenario::warmup_ticks() const { return whole_ticks(warmup_s, tick_s(), "warmup"); }
Tick Scenario::ticks_per_period() const {
  return whole_ticks(scheduling_period_s, tick_s(), "scheduling period");
}
Tick Scenario::ticks_per_rotation() const {
  return whole_ticks(protocol.rotation_period_s, tick_s(), "rotation period");
}

Estimate estimate(std::vector<double> samples) {
  Estimate e;
  e.n = static_cast<int>(samples.size());
  if (samples.empty()) return e;
  std::sort(samples.begin(), samples.end());
  double sum = 0.0;
  for (double v : samples) sum += v;
  e.mean = sum / e.n;
  if (e.n < 2) return e;
  double ss = 0.0;
  for (double v : samples) ss += (v - e.mean) * (v - e.mean);
  const double sd = std::sqrt(ss / (e.n - 1));
  const boost::math::students_t dist(e.n - 1);
  e.ci95 = boost::math::quantile(boost::math::complement(dist, 0.025)) * sd / std::sqrt(e.n);
  return e;
}

PairLink pair_link(std::uint64_t seed, std::uint32_t replication, std::uint32_t a,
                   std::uint32_t b) {
  const std::uint64_t lo = std::min(a, b), hi = std::max(a, b);
  std::uint64_t h = mix64(seed);
  h = mix64(h ^ replication);
  h = mix64(h ^ ((lo << 32) | hi));
  PairLink link;
  link.los_uniform = unit(mix64(h ^ 1));
  const double u1 = 1.0 - unit(mix64(h ^ 2));  // (0, 1]
  const double u2 = unit(mix64(h ^ 3));
  link.shadow_z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  return link;
}

// ---------------------------------------------------------------------------

struct Simulation::Impl {
  Impl(const Scenario& s, std::uint32_t r);

  void reallocate();
  void period_boundary(Tick k);
  void regroup(Tick k);
  void occasion(Tick k);
  void monitor(Tick k, std::size_t t);
  double d2d_gain(std::uint32_t a, std::uint32_t b, double d) const;
  // gNB with the most TRPs in beacon range; the nearest TRP's gNB wins ties.
  protocol::GnbId gnb_near(Position p) const {
    const protocol::GnbId nearest = pop.world.trps[pop.world.nearest_trp(p)].gnb;
    std::map<protocol::GnbId, int> count;
    for (const auto& t : pop.world.trps)
      if (pop.world.torus.distance(p, t.position) <= sc.detection.beacon_range_m) ++count[t.gnb];
    protocol::GnbId best = nearest;
    int most = count.contains(nearest) ? count.at(nearest) : 0;
    for (const auto& [g, c] : count)
      if (c > most) best = g, most = c;
    return best;
  }
  double entity_rate(std::uint32_t ue) const;
  MetricsRecord run();

  Scenario sc;
  std::uint32_t rep;
  resources::ResourceGrid grid;
  RandomStream rng_deploy, rng_mobility, rng_shadow, rng_fading, rng_detect;
  mobility::Population pop;
  mobility::MobilityModel mobility;
  radio::UmiStreetCanyon access_model;
  radio::ChannelParams d2d_params;
  radio::UmiStreetCanyon d2d_model;
  resources::Allocator alloc;
  protocol::GroupManager mgr;
  radio::DetectionParams d2d_det;
  bool grouped;
  std::size_t n_trp;
  double pb_w;
  double noise_w;
  double inv_sqrt_nz;

  std::vector<double> los_u;     // per (ue, trp)
  std::vector<double> shadow_z;  // per (ue, trp)
  std::vector<Position> positions;

  struct Tx {
    EntityKey entity;
    std::uint32_t ue;
    resources::BeaconResource res;
  };
  std::vector<Tx> txs;
  std::vector<double> dist, rx, sinr, shadow_db, fading;
  std::vector<char> los;
  std::vector<std::vector<std::size_t>> by_berb;

  std::map<EntityKey, protocol::TrackRecord> tracks;
  std::map<EntityKey, Position> latest;
  std::map<protocol::GroupId, std::pair<protocol::GnbId, int>> streaks;

  Observer observer;
  MetricsRecord m;
  double rate_sum = 0.0;
  std::int64_t rate_samples = 0;
  std::int64_t reconfig_at_warmup = 0;
};

namespace {

radio::ChannelParams d2d_channel(radio::ChannelParams p) {
  p.trp_height_m = p.ue_height_m;
  return p;
}

mobility::Population deploy_with(const Scenario& s, RandomStream& rng) {
  s.validate();
  mobility::Population pop = mobility::deploy(s.deployment, rng);
  for (std::size_t i = 0; i < s.fixed_positions.size(); ++i)
    pop.ues[i].position = pop.world.torus.wrap(s.fixed_positions[i]);
  return pop;
}

}  // namespace

Simulation::Impl::Impl(const Scenario& s, std::uint32_t r)
    : sc(s),
      rep(r),
      grid(resources::dimension(s.dimensioning)),
      rng_deploy(s.seed, r, StreamTag::deployment),
      rng_mobility(s.seed, r, StreamTag::mobility),
      rng_shadow(s.seed, r, StreamTag::shadowing),
      rng_fading(s.seed, r, StreamTag::fading),
      rng_detect(s.seed, r, StreamTag::detection),
      pop(deploy_with(s, rng_deploy)),
      mobility(pop, s.deployment.direction_change_mean_s, rng_mobility),
      access_model(s.channel),
      d2d_params(d2d_channel(s.channel)),
      d2d_model(d2d_params),
      alloc(grid, s.reuse ? s.reuse_distance_m : resources::Allocator::kNoReuse, pop.world.torus),
      mgr(pop.ues.size(), s.protocol),
      d2d_det(s.detection),
      grouped(s.deployment.grouping == mobility::Grouping::grouped),
      n_trp(pop.world.trps.size()),
      pb_w(radio::dbm_to_watt(s.tx_power_dbm) / static_cast<double>(s.dimensioning.sequence_length)),
      noise_w(s.detection.noise_w()),
      inv_sqrt_nz(1.0 / std::sqrt(static_cast<double>(s.detection.sequence_length))) {
  d2d_det.n_antennas = 1;
  const std::size_t n = pop.ues.size() * n_trp;
  los_u.resize(n);
  shadow_z.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    los_u[i] = rng_shadow.uniform();
    shadow_z[i] = rng_shadow.normal();
  }
  positions.resize(pop.ues.size());
  for (const auto& ue : pop.ues) positions[ue.id] = ue.position;

  std::vector<resources::Allocator::Entity> all;
  for (const auto& ue : pop.ues) all.push_back({EntityKey::ue(ue.id), ue.position});
  alloc.allocate(all);
  if (grouped) {
    for (const auto& c : pop.cohorts)
      mgr.form_group(c.members, alloc, positions, gnb_near(positions[c.members.front()]), 0);
    reallocate();
  }
}

void Simulation::Impl::reallocate() {
  std::vector<resources::Allocator::Entity> entities;
  for (const auto& ue : pop.ues)
    if (mgr.mode(ue.id) == protocol::UeMode::individual)
      entities.push_back({EntityKey::ue(ue.id), positions[ue.id]});
  for (const auto& [id, g] : mgr.groups())
    if (g.state == protocol::GroupState::active)
      entities.push_back({EntityKey::group(id), positions[g.transmitter]});
  alloc.allocate(entities);
  mgr.refresh_resources(alloc);
}

void Simulation::Impl::period_boundary(Tick k) {
  const double now = static_cast<double>(k) * sc.tick_s();
  for (const auto& [key, pos] : latest) {
    if (!alloc.find(key)) continue;
    auto it = tracks.try_emplace(key, key, sc.protocol.track_window).first;
    it->second.add({now, pos});
  }
  latest.clear();
  std::erase_if(tracks, [&](const auto& kv) { return alloc.find(kv.first) == nullptr; });
  if (grouped && sc.protocol.regroup) regroup(k);
  reallocate();
}

// Entities whose tracks stayed together form a new group; individuals that
// co-move with an existing group are added to it.
void Simulation::Impl::regroup(Tick k) {
  std::vector<protocol::TrackRecord> records;
  records.reserve(tracks.size());
  for (const auto& [key, rec] : tracks) records.push_back(rec);
  const auto sets = protocol::identify_group(records, sc.protocol.identify_radius_m,
                                             sc.protocol.track_window, pop.world.torus);
  for (const auto& set : sets) {
    std::vector<std::uint32_t> ues;
    std::optional<protocol::GroupId> host;
    for (const auto& key : set) {
      if (!key.is_group()) ues.push_back(key.id);
      else if (!host) host = key.id;
    }
    if (ues.empty()) continue;
    if (host) {
      for (auto ue : ues) mgr.add_member(*host, ue, alloc, k);
    } else if (ues.size() >= 2) {
      mgr.form_group(ues, alloc, positions, gnb_near(positions[ues.front()]), k);
    } else {
      continue;
    }
    for (auto ue : ues) tracks.erase(EntityKey::ue(ue));
  }
}

double Simulation::Impl::d2d_gain(std::uint32_t a, std::uint32_t b, double d) const {
  const PairLink link = pair_link(sc.seed, rep, a, b);
  const bool is_los = link.los_uniform < d2d_model.los_probability(d);
  const double loss = d2d_model.loss_db(d, is_los) + d2d_params.shadow_sigma_db(is_los) * link.shadow_z;
  return radio::db_to_linear(-loss);
}

void Simulation::Impl::occasion(Tick k) {
  txs.clear();
  for (const auto& [key, a] : alloc.assignments()) {
    if (!a.transmits_at(k)) continue;
    const std::uint32_t ue = key.is_group() ? mgr.group(key.id).transmitter : key.id;
    txs.push_back({key, ue, a.resource});
  }
  if (!sc.simulate_radio) return;

  const std::size_t nt = txs.size();
  const int nz = static_cast<int>(sc.detection.sequence_length);
  dist.assign(nt * n_trp, 0.0);
  rx.assign(nt * n_trp, 0.0);
  sinr.assign(nt * n_trp, 0.0);
  shadow_db.assign(nt * n_trp, 0.0);
  fading.assign(nt * n_trp, 0.0);
  los.assign(nt * n_trp, 0);
  const auto& trps = pop.world.trps;
  for (std::size_t t = 0; t < nt; ++t) {
    const Position p = positions[txs[t].ue];
    for (std::size_t j = 0; j < n_trp; ++j) {
      const std::size_t i = t * n_trp + j;
      const std::size_t link = static_cast<std::size_t>(txs[t].ue) * n_trp + j;
      const double d = pop.world.torus.distance(p, trps[j].position);
      const bool l = los_u[link] < access_model.los_probability(d);
      dist[i] = d;
      los[i] = l;
      shadow_db[i] = sc.channel.shadow_sigma_db(l) * shadow_z[link];
      fading[i] = radio::rayleigh_power(rng_fading);
      const double gain = radio::db_to_linear(-(access_model.loss_db(d, l) + shadow_db[i]));
      rx[i] = pb_w * nz * gain * fading[i];
    }
  }

  by_berb.assign(static_cast<std::size_t>(sc.dimensioning.n_berb), {});
  for (std::size_t t = 0; t < nt; ++t) by_berb[static_cast<std::size_t>(txs[t].res.berb)].push_back(t);

  const double range = sc.detection.beacon_range_m;
  std::vector<double> root_sum(static_cast<std::size_t>(sc.dimensioning.n_roots));
  for (std::size_t j = 0; j < n_trp; ++j) {
    for (const auto& bucket : by_berb) {
      if (std::none_of(bucket.begin(), bucket.end(),
                       [&](std::size_t t) { return dist[t * n_trp + j] <= range; }))
        continue;
      std::fill(root_sum.begin(), root_sum.end(), 0.0);
      for (std::size_t t : bucket) root_sum[static_cast<std::size_t>(txs[t].res.seq.root)] += rx[t * n_trp + j];
      for (std::size_t t : bucket) {
        const std::size_t i = t * n_trp + j;
        if (dist[i] > range) continue;
        const auto seq = txs[t].res.seq;
        double other_roots = 0.0;
        for (std::size_t r = 0; r < root_sum.size(); ++r)
          if (static_cast<int>(r) != seq.root) other_roots += root_sum[r];
        double same_seq = 0.0;
        for (std::size_t u : bucket)
          if (u != t && txs[u].res.seq == seq) same_seq += rx[u * n_trp + j];
        sinr[i] = rx[i] / (noise_w + inv_sqrt_nz * other_roots + same_seq);
      }
    }
  }

  const bool measured = k >= sc.warmup_ticks();
  std::vector<protocol::Detection> hits;
  for (std::size_t t = 0; t < nt; ++t) {
    hits.clear();
    std::map<protocol::GnbId, std::pair<int, double>> votes;
    for (std::size_t j = 0; j < n_trp; ++j) {
      const std::size_t i = t * n_trp + j;
      if (dist[i] > range) continue;
      const double p = sc.forced_p_md ? *sc.forced_p_md
                                      : radio::miss_detection_prob(sinr[i], sc.detection, dist[i]);
      if (!radio::detect(p, rng_detect)) continue;
      hits.push_back({trps[j].position, rx[i]});
      auto& v = votes[trps[j].gnb];
      ++v.first;
      v.second += rx[i];
    }
    if (measured) {
      ++m.beacons;
      if (hits.empty()) ++m.misses;
    }
    if (auto est = protocol::estimate_position(hits, pop.world.torus)) latest[txs[t].entity] = *est;

    if (!txs[t].entity.is_group() || votes.empty()) continue;
    const protocol::GroupId g = txs[t].entity.id;
    const protocol::GnbId owner = *mgr.contexts().owner(g);
    auto best = votes.begin();
    for (auto it = votes.begin(); it != votes.end(); ++it)
      if (it->second.first > best->second.first ||
          (it->second.first == best->second.first && it->second.second > best->second.second))
        best = it;
    // the owner keeps the context unless another gNB has strictly more detections
    if (const auto own = votes.find(owner); own != votes.end() && own->second.first == best->second.first)
      best = own;
    if (best->first == owner) {
      streaks.erase(g);
      continue;
    }
    auto& streak = streaks[g];
    streak = {best->first, streak.first == best->first ? streak.second + 1 : 1};
    if (streak.second >= sc.protocol.handover_hysteresis) {
      mgr.handover_context(g, owner, best->first, k);
      streaks.erase(g);
    }
  }

  if (observer) {
    OccasionSnapshot snap;
    snap.tick = k;
    for (const auto& tx : txs) snap.transmissions.push_back({tx.entity, tx.ue, positions[tx.ue], tx.res});
    for (std::size_t t = 0; t < nt; ++t)
      for (std::size_t j = 0; j < n_trp; ++j) {
        const std::size_t i = t * n_trp + j;
        snap.links.push_back({t, static_cast<std::uint32_t>(j), dist[i], los[i] != 0, shadow_db[i],
                              fading[i], dist[i] <= range, sinr[i]});
      }
    observer(snap);
  }

  for (std::size_t t = 0; t < nt; ++t)
    if (txs[t].entity.is_group()) monitor(k, t);
}

// Members receive the group beacon over a UE-to-UE link with the same
// detection model as a single-antenna TRP.
void Simulation::Impl::monitor(Tick k, std::size_t t) {
  const protocol::GroupId g = txs[t].entity.id;
  const protocol::Group& group = mgr.group(g);
  if (group.state != protocol::GroupState::active) return;
  const std::uint32_t tx = txs[t].ue;
  const int nz = static_cast<int>(sc.detection.sequence_length);
  const double range = sc.detection.beacon_range_m;
  const auto& bucket = by_berb[static_cast<std::size_t>(txs[t].res.berb)];

  std::vector<protocol::ReceptionOutcome> outcomes;
  for (auto member : group.members) {
    if (member == tx) continue;
    const double d = std::max(1.0, pop.world.torus.distance(positions[tx], positions[member]));
    bool received = false;
    if (d <= range) {
      const double signal = pb_w * nz * d2d_gain(tx, member, d) * radio::rayleigh_power(rng_fading);
      double interference = 0.0;
      for (std::size_t u : bucket) {
        if (u == t || txs[u].ue == member) continue;
        const double rho = radio::cross_correlation(txs[u].res.seq, txs[t].res.seq, nz);
        if (rho == 0.0) continue;
        const double du = std::max(1.0, pop.world.torus.distance(positions[txs[u].ue], positions[member]));
        interference += rho * pb_w * nz * d2d_gain(txs[u].ue, member, du) * radio::rayleigh_power(rng_fading);
      }
      const double s = signal / (noise_w + interference);
      const double p = sc.forced_p_md ? *sc.forced_p_md : radio::miss_detection_prob(s, d2d_det, d);
      received = radio::detect(p, rng_detect);
    }
    outcomes.push_back({member, received});
  }
  for (const auto& leave : mgr.monitor_membership(g, outcomes, k)) {
    const protocol::Group& now = mgr.group(g);
    const auto ue = leave.ues.front();
    if (now.state == protocol::GroupState::active && now.contains(ue))
      mgr.handle_member_leave(g, ue, alloc, positions, k);
  }
}

double Simulation::Impl::entity_rate(std::uint32_t ue) const {
  const auto gid = mgr.group_of(ue);
  const auto* a = alloc.find(gid ? EntityKey::group(*gid) : EntityKey::ue(ue));
  return a ? a->rate_hz : 0.0;
}

MetricsRecord Simulation::Impl::run() {
  const Tick total = sc.total_ticks();
  const Tick warmup = sc.warmup_ticks();
  const Tick per_period = sc.ticks_per_period();
  const Tick per_rotation = sc.ticks_per_rotation();
  const double dt = sc.tick_s();
  for (Tick k = 0; k < total; ++k) {
    if (k > 0) {
      mobility.step(dt);
      for (const auto& ue : pop.ues) positions[ue.id] = ue.position;
      if (k % per_period == 0) period_boundary(k);
      if (grouped && k % per_rotation == 0)
        for (auto g : mgr.active_groups()) mgr.rotate_transmitter(g, k);
    }
    if (k == warmup) reconfig_at_warmup = mgr.reconfigurations();
    occasion(k);
    if (k >= warmup) {
      for (const auto& ue : pop.ues) rate_sum += entity_rate(ue.id);
      rate_samples += static_cast<std::int64_t>(pop.ues.size());
    }
    if (sc.check_invariants) {
      try {
        mgr.check_invariants(alloc);
      } catch (const std::logic_error& e) {
        throw std::logic_error("replication " + std::to_string(rep) + ", tick " +
                               std::to_string(k) + ": " + e.what());
      }
    }
  }

  m.ticks = total;
  m.mean_rate_hz = rate_samples ? rate_sum / static_cast<double>(rate_samples) : 0.0;
  m.p_md = m.beacons ? static_cast<double>(m.misses) / static_cast<double>(m.beacons) : 0.0;
  m.reconfigurations = mgr.reconfigurations() - reconfig_at_warmup;
  for (const auto& e : mgr.events()) {
    if (e.tick < warmup) continue;
    switch (e.type) {
      case protocol::EventType::group_formed: ++m.groups_formed; break;
      case protocol::EventType::member_added: ++m.members_added; break;
      case protocol::EventType::member_left: ++m.member_leaves; break;
      case protocol::EventType::transmitter_left: ++m.transmitter_leaves; break;
      case protocol::EventType::group_dissolved: ++m.dissolutions; break;
      case protocol::EventType::transmitter_rotated: ++m.rotations; break;
      case protocol::EventType::context_transferred: ++m.handovers; break;
    }
  }
  return m;
}

Simulation::Simulation(const Scenario& scenario, std::uint32_t replication)
    : impl_(std::make_unique<Impl>(scenario, replication)) {}
Simulation::~Simulation() = default;

void Simulation::set_observer(Observer observer) { impl_->observer = std::move(observer); }
MetricsRecord Simulation::run() { return impl_->run(); }
const std::vector<protocol::Event>& Simulation::events() const { return impl_->mgr.events(); }
const mobility::Population& Simulation::population() const { return impl_->pop; }
const resources::Allocator& Simulation::allocator() const { return impl_->alloc; }
const protocol::GroupManager& Simulation::groups() const { return impl_->mgr; }

MetricsRecord run(const Scenario& scenario, std::uint32_t replication) {
  Simulation sim(scenario, replication);
  return sim.run();
}

Aggregate replicate(const Scenario& scenario, std::ostream* event_log) {
  scenario.validate();
  const auto n = static_cast<std::size_t>(scenario.replications);
  std::vector<MetricsRecord> runs(n);
  std::vector<std::vector<protocol::Event>> events(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t r = next++; r < n; r = next++) {
      try {
        Simulation sim(scenario, static_cast<std::uint32_t>(r));
        runs[r] = sim.run();
        if (event_log) events[r] = sim.events();
      } catch (...) {
        errors[r] = std::current_exception();
      }
    }
  };
  const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(scenario.threads), n);
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  if (event_log) {
    protocol::write_event_header(*event_log);
    for (std::size_t r = 0; r < n; ++r)
      for (const auto& e : events[r]) protocol::write_event_row(*event_log, static_cast<int>(r), e);
  }
  Aggregate agg;
  std::vector<double> rates, pmd;
  for (const auto& run : runs) {
    rates.push_back(run.mean_rate_hz);
    pmd.push_back(run.p_md);
  }
  agg.mean_rate_hz = estimate(rates);
  agg.p_md = estimate(pmd);
  agg.runs = std::move(runs);
  return agg;
}

// ---------------------------------------------------------------------------

std::vector<WrongCellPoint> wrong_cell_experiment(const Scenario& scenario,
                                                  const std::vector<double>& radii_m,
                                                  const WrongCellParams& params) {
  scenario.validate();
  if (params.drops < 1) throw std::invalid_argument("need at least one drop");
  if (!(params.shadow_corr_los_m > 0.0) || !(params.shadow_corr_nlos_m > 0.0) ||
      !(params.los_corr_m > 0.0))
    throw std::invalid_argument("correlation distances must be positive");
  for (double r : radii_m)
    if (!(r >= 0.0)) throw std::invalid_argument("group radius must be non-negative");
  const auto& dep = scenario.deployment;
  if (dep.group_size < 2) throw std::invalid_argument("wrong-cell experiment needs groups");

  const mobility::World world = mobility::make_world(dep.isd_m, dep.trps_per_side, dep.trps_per_gnb_side);
  const radio::UmiStreetCanyon model(scenario.channel);
  const std::size_t nt = world.trps.size();
  const std::size_t members = static_cast<std::size_t>(dep.group_size - 1);
  const std::size_t nr = radii_m.size();

  std::vector<std::vector<double>> p_samples(nr), delta_samples(nr);
  std::vector<double> u_tx(nt), z_tx(nt), pl_tx(nt), pl_m(nt);
  std::vector<Position> offsets(members);
  std::vector<double> keep(members * nt), indep(members * nt), noise(members * nt);

  for (int rep = 0; rep < scenario.replications; ++rep) {
    RandomStream rng(scenario.seed, static_cast<std::uint32_t>(rep), StreamTag::wrong_cell);
    std::vector<std::int64_t> wrong(nr, 0);
    std::vector<double> delta_sum(nr, 0.0);
    for (int drop = 0; drop < params.drops; ++drop) {
      const Position tx{rng.uniform(0.0, world.torus.width()), rng.uniform(0.0, world.torus.height())};
      for (std::size_t j = 0; j < nt; ++j) {
        u_tx[j] = rng.uniform();
        z_tx[j] = rng.normal();
      }
      for (std::size_t m = 0; m < members; ++m) {
        offsets[m] = mobility::sample_disc(1.0, rng);
        for (std::size_t j = 0; j < nt; ++j) {
          keep[m * nt + j] = rng.uniform();
          indep[m * nt + j] = rng.uniform();
          noise[m * nt + j] = rng.normal();
        }
      }
      std::vector<bool> los_tx(nt);
      for (std::size_t j = 0; j < nt; ++j) {
        const double d = world.torus.distance(tx, world.trps[j].position);
        los_tx[j] = u_tx[j] < model.los_probability(d);
        pl_tx[j] = model.loss_db(d, los_tx[j]) + scenario.channel.shadow_sigma_db(los_tx[j]) * z_tx[j];
      }
      const auto best_tx = static_cast<std::size_t>(std::min_element(pl_tx.begin(), pl_tx.end()) - pl_tx.begin());

      for (std::size_t ri = 0; ri < nr; ++ri) {
        const double r = radii_m[ri];
        for (std::size_t m = 0; m < members; ++m) {
          const Position pos = world.torus.wrap({tx.x + r * offsets[m].x, tx.y + r * offsets[m].y});
          const double sep = world.torus.distance(tx, pos);
          const double keep_los = std::exp(-sep / params.los_corr_m);
          for (std::size_t j = 0; j < nt; ++j) {
            const std::size_t i = m * nt + j;
            const double d = world.torus.distance(pos, world.trps[j].position);
            const bool l = keep[i] < keep_los ? static_cast<bool>(los_tx[j])
                                              : indep[i] < model.los_probability(d);
            const double rho = std::exp(-sep / (l ? params.shadow_corr_los_m : params.shadow_corr_nlos_m));
            const double z = rho * z_tx[j] + std::sqrt(1.0 - rho * rho) * noise[i];
            pl_m[j] = model.loss_db(d, l) + scenario.channel.shadow_sigma_db(l) * z;
          }
          const auto best_m = static_cast<std::size_t>(std::min_element(pl_m.begin(), pl_m.end()) - pl_m.begin());
          if (best_m != best_tx) {
            ++wrong[ri];
            delta_sum[ri] += pl_m[best_tx] - pl_m[best_m];
          }
        }
      }
    }
    const double samples = static_cast<double>(params.drops) * static_cast<double>(members);
    for (std::size_t ri = 0; ri < nr; ++ri) {
      p_samples[ri].push_back(static_cast<double>(wrong[ri]) / samples);
      delta_samples[ri].push_back(wrong[ri] ? delta_sum[ri] / static_cast<double>(wrong[ri]) : 0.0);
    }
  }

  std::vector<WrongCellPoint> out;
  for (std::size_t ri = 0; ri < nr; ++ri)
    out.push_back({radii_m[ri], estimate(p_samples[ri]), estimate(delta_samples[ri])});
  return out;
}

}  // namespace beaconsim::engine
