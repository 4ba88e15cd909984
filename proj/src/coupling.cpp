#include "ifdyn/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace ifdyn {

const char* to_string(Model m) noexcept { return m == Model::sos ? "sos" : "surface"; }

Model parse_model(const std::string& name) {
  if (name == "sos") return Model::sos;
  if (name == "surface") return Model::surface;
  throw Error(Errc::invalid_config, "unknown model '" + name + "'");
}

namespace {

SosPath sos_base(const SosModel& m) {
  auto p = SosPath::constant(SosGeometry::bounded(m.L, m.h, m.M), 0);
  if (m.wall) p.set_floor(wall_profile(m.L, m.h).values);
  return p;
}

}  // namespace

SosPath SosModel::top() const {
  auto p = sos_base(*this);
  p.fill_upper();
  return p;
}

SosPath SosModel::bottom() const {
  auto p = sos_base(*this);
  p.fill_lower();
  return p;
}

HeightField SurfaceModel::plane() const {
  return planar_surface(std::make_shared<const Region>(Region::rectangle(N, N)), n, offset);
}

HeightField SurfaceModel::top() const { return maximal_surface(plane()); }
HeightField SurfaceModel::bottom() const { return minimal_surface(plane()); }

CoalescenceRecord coalescence_time(const SosModel& m, std::uint64_t seed, std::uint64_t replica, double horizon) {
  EventStream ev(seed, replica, static_cast<std::size_t>(m.L));
  auto rec = coalesce_pair(m.top(), m.bottom(), ev, horizon);
  rec.model = Model::sos;
  rec.L = m.L;
  rec.h = m.h;
  rec.seed = seed;
  rec.replica = replica;
  return rec;
}

CoalescenceRecord coalescence_time(const SurfaceModel& m, std::uint64_t seed, std::uint64_t replica, double horizon) {
  const auto plane = m.plane();
  EventStream ev(seed, replica, plane.size());
  auto rec = coalesce_pair(maximal_surface(plane), minimal_surface(plane), ev, horizon);
  rec.model = Model::surface;
  rec.L = m.N;
  rec.h = m.offset;
  rec.seed = seed;
  rec.replica = replica;
  return rec;
}

CftpResult cftp_sample(const SosModel& m, std::uint64_t seed, std::uint64_t sample, double T0, int max_doublings) {
  return cftp(m.top(), m.bottom(), seed, sample, T0, max_doublings);
}

CftpResult cftp_sample(const SurfaceModel& m, std::uint64_t seed, std::uint64_t sample, double T0,
                       int max_doublings) {
  const auto plane = m.plane();
  return cftp(maximal_surface(plane), minimal_surface(plane), seed, sample, T0, max_doublings);
}

std::vector<std::pair<double, double>> survival_curve(const std::vector<CoalescenceRecord>& records) {
  std::vector<std::pair<double, bool>> obs;
  obs.reserve(records.size());
  for (const auto& r : records) obs.emplace_back(r.time, r.censored);
  // events before censorings at tied times
  std::sort(obs.begin(), obs.end(), [](const auto& a, const auto& b) {
    return a.first < b.first || (a.first == b.first && !a.second && b.second);
  });
  std::vector<std::pair<double, double>> curve{{0.0, 1.0}};
  double s = 1.0;
  std::size_t at_risk = obs.size();
  std::size_t i = 0;
  while (i < obs.size()) {
    const double t = obs[i].first;
    std::size_t d = 0, c = 0;
    for (; i < obs.size() && obs[i].first == t; ++i) (obs[i].second ? c : d) += 1;
    if (d > 0) {
      s *= 1.0 - static_cast<double>(d) / static_cast<double>(at_risk);
      curve.emplace_back(t, s);
    }
    at_risk -= d + c;
  }
  return curve;
}

namespace {

std::optional<double> crossing(const std::vector<CoalescenceRecord>& records) {
  const double thr = 1.0 / (2.0 * std::exp(1.0));
  for (const auto& [t, s] : survival_curve(records))
    if (s <= thr) return t;
  return std::nullopt;
}

}  // namespace

TmixEstimate tmix_upper_from_coalescence(const std::vector<CoalescenceRecord>& records, int bootstrap,
                                         std::uint64_t seed, double level) {
  if (records.size() < 30) throw Error(Errc::invalid_data, "need at least 30 coalescence records");
  TmixEstimate out;
  out.records = records.size();
  for (const auto& r : records) out.censored += r.censored;
  if (out.censored == records.size()) throw Error(Errc::undefined_estimate, "all records are censored");
  const auto est = crossing(records);
  if (!est) throw Error(Errc::undefined_estimate, "survival never drops below 1/(2e) before censoring");
  out.estimate = *est;

  std::vector<double> boot;
  CounterRng rng = CounterRng::stream(seed, 0x6b6d);
  std::vector<CoalescenceRecord> resample(records.size());
  for (int b = 0; b < bootstrap; ++b) {
    for (auto& r : resample) r = records[rng.below(records.size())];
    // an undefined resample means the crossing lies beyond every observation
    const auto e = crossing(resample);
    boot.push_back(e ? *e : std::numeric_limits<double>::infinity());
  }
  if (boot.empty()) {
    out.lo = out.hi = out.estimate;
    return out;
  }
  std::sort(boot.begin(), boot.end());
  const double a = (1.0 - level) / 2.0;
  auto q = [&](double p) {
    const auto k = static_cast<std::size_t>(std::clamp(std::floor(p * static_cast<double>(boot.size() - 1) + 0.5), 0.0,
                                                       static_cast<double>(boot.size() - 1)));
    return boot[k];
  };
  out.lo = q(a);
  out.hi = q(1.0 - a);
  return out;
}

}  // namespace ifdyn
