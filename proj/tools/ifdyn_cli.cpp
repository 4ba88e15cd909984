#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "ifdyn/error.hpp"
#include "ifdyn/harness.hpp"

using nlohmann::json;

namespace {

struct Overrides {
  std::string config;
  std::string model, profile, out;
  std::vector<int> L;
  int h = 0, M = 0;
  bool wall = false;
  std::vector<double> slope, times, thresholds;
  double C = 0, alpha1 = 0, horizon = 0;
  long replicas = 0;
  std::uint64_t seed = 0;
};

void add_experiment_options(CLI::App* sub, Overrides& o) {
  sub->add_option("--config", o.config, "JSON config file")->check(CLI::ExistingFile);
  sub->add_option("--model", o.model, "sos or surface");
  sub->add_option("--L", o.L, "system size(s)");
  sub->add_option("--h", o.h, "boundary height (sos)");
  sub->add_option("--M", o.M, "window half-width (sos)");
  sub->add_flag("--wall", o.wall, "hard floor at height 0");
  sub->add_option("--slope", o.slope, "slope normal n1 n2 n3")->expected(3);
  sub->add_option("--C", o.C, "cap plane offset");
  sub->add_option("--profile", o.profile, "schedule profile (asymptotic or scaled)");
  sub->add_option("--alpha1", o.alpha1, "sos mixing exponent");
  sub->add_option("--replicas", o.replicas, "replicas per size");
  sub->add_option("--seed", o.seed, "master seed");
  sub->add_option("--horizon", o.horizon, "time horizon");
  sub->add_option("--times", o.times, "checkpoint times");
  sub->add_option("--thresholds", o.thresholds, "fluctuation thresholds");
  sub->add_option("--out", o.out, "output directory");
}

json merged_config(const CLI::App* sub, const Overrides& o, const std::string& experiment) {
  json j = json::object();
  if (!o.config.empty()) {
    std::ifstream is(o.config);
    try {
      j = json::parse(is);
    } catch (const json::exception& e) {
      throw ifdyn::Error(ifdyn::Errc::invalid_config, "config: " + std::string(e.what()));
    }
  }
  json patch = json::object();
  auto set = [&](const char* flag, const char* key, const json& v) {
    if (sub->count(flag) > 0) patch[key] = v;
  };
  set("--model", "model", o.model);
  set("--L", "L", o.L);
  set("--h", "h", o.h);
  set("--M", "M", o.M);
  set("--wall", "wall", o.wall);
  set("--slope", "slope", o.slope);
  set("--C", "C", o.C);
  set("--profile", "profile", o.profile);
  set("--alpha1", "alpha1", o.alpha1);
  set("--replicas", "replicas", o.replicas);
  set("--seed", "seed", o.seed);
  set("--horizon", "horizon", o.horizon);
  set("--times", "times", o.times);
  set("--thresholds", "thresholds", o.thresholds);
  set("--out", "out", o.out);
  patch["experiment"] = experiment;
  j.merge_patch(patch);
  return j;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
  return cells;
}

int run_fit(const std::string& path, const std::string& xcol, const std::string& ycol, bool invert) {
  std::ifstream is(path);
  if (!is) throw ifdyn::Error(ifdyn::Errc::invalid_data, "fit: cannot read " + path);
  std::string line;
  std::getline(is, line);
  const auto header = split(line);
  const auto col = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ifdyn::Error(ifdyn::Errc::invalid_data, "fit: no column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t xi = col(xcol), yi = col(ycol);
  std::map<double, std::vector<double>> groups;
  while (std::getline(is, line)) {
    const auto cells = split(line);
    if (cells.size() <= std::max(xi, yi)) continue;
    const double y = std::stod(cells[yi]);
    groups[std::stod(cells[xi])].push_back(invert ? 1.0 / y : y);
  }
  std::vector<std::pair<double, double>> points;
  for (auto& [x, ys] : groups) {
    std::sort(ys.begin(), ys.end());
    const std::size_t n = ys.size();
    points.emplace_back(x, n % 2 ? ys[n / 2] : 0.5 * (ys[n / 2 - 1] + ys[n / 2]));
  }
  const auto f = ifdyn::fit_scaling(points);
  json out{{"z", f.z}, {"intercept", f.intercept}, {"residual", f.residual}, {"band", {f.lo, f.hi}}, {"points", points}};
  std::cout << out.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interface dynamics experiments"};
  app.set_help_flag("--help", "print help");  // frees -h for the boundary height
  app.require_subcommand(1);
  Overrides o;
  std::vector<std::pair<CLI::App*, std::string>> subs;
  for (const char* name :
       {"simulate", "coalesce", "cftp", "gap-exact", "tv-exact", "schedule", "monitor", "fluctuations"}) {
    auto* sub = app.add_subcommand(name, std::string("run the ") + name + " experiment");
    add_experiment_options(sub, o);
    subs.emplace_back(sub, name);
  }
  std::string input, xcol = "L", ycol;
  bool invert = false;
  auto* fit = app.add_subcommand("fit", "log-log scaling fit of a CSV column (median per size)");
  fit->add_option("--input", input, "CSV file")->required()->check(CLI::ExistingFile);
  fit->add_option("--x", xcol, "size column");
  fit->add_option("--y", ycol, "value column")->required();
  fit->add_flag("--invert", invert, "fit the reciprocal (e.g. relaxation time from gap)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (fit->parsed()) return run_fit(input, xcol, ycol, invert);
    for (const auto& [sub, name] : subs) {
      if (!sub->parsed()) continue;
      const auto cfg = ifdyn::config_from_json(merged_config(sub, o, name));
      const auto rep = ifdyn::run_experiment(cfg);
      for (const auto& f : rep.files) std::cout << f << '\n';
    }
  } catch (const ifdyn::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
