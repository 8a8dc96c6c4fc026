// pdmpvol: polytope volume estimation from the command line.
//
//   pdmpvol volume    --model cube --dim 20 --samples 100000 --repeats 8
//   pdmpvol benchmark --model cube --dims 25,50,100
//   pdmpvol sample    --model cube --dim 2 --sigma 1 --samples 1000 --event-log ev.csv

#include "pdmpvol/pdmpvol.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace {

using namespace pdmpvol;

struct CommonOptions {
  std::string model = "cube";
  std::string file;
  Index dim = 10;
  std::uint64_t seed = 1;
  std::string format = "json";
  std::string out;
};

struct EstimatorOptions {
  std::uint64_t samples = 100000;
  std::uint64_t repeats = 24;
  unsigned jobs = 1;
  double schedule_factor = 0.0;
  std::string final_mode = "exact";
  double cmin = 0.1;
  double cmax = 0.2;
  int pilot_len = 100;
  std::string lambda_refresh = "auto";
  int sigma0_trials = 25000;
  int max_escalations = 1;
};

void add_common(CLI::App* app, CommonOptions& o) {
  app->add_option("--model", o.model,
                  "cube | std-simplex | iso-simplex | file | file:<path>")
      ->capture_default_str();
  app->add_option("--file", o.file, "Polytope file (with --model file)");
  app->add_option("--dim", o.dim, "Dimension of built-in models")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app->add_option("--seed", o.seed, "Base random seed")->capture_default_str();
  app->add_option("--out", o.out, "Output path (default: stdout)");
}

void add_estimator(CLI::App* app, EstimatorOptions& o, bool with_samples) {
  if (with_samples)
    app->add_option("--samples", o.samples, "Production sample budget N")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
  app->add_option("--repeats", o.repeats, "Independent repeats")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app->add_option("--jobs", o.jobs, "Concurrent repeats")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app->add_option("--schedule-factor", o.schedule_factor,
                  "Variance ratio between phases (default 1 + 1/sqrt(d))");
  app->add_option("--final-mode", o.final_mode, "Last phase: exact | flat")
      ->capture_default_str()
      ->check(CLI::IsMember({"exact", "flat"}));
  app->add_option("--cmin", o.cmin, "Lower mass bound for the first Gaussian")
      ->capture_default_str();
  app->add_option("--cmax", o.cmax, "Upper mass bound for the first Gaussian")
      ->capture_default_str();
  app->add_option("--pilot-len", o.pilot_len, "Samples per ESS pilot")->capture_default_str();
  app->add_option("--lambda-refresh", o.lambda_refresh, "auto | refresh rate")
      ->capture_default_str();
  app->add_option("--sigma0-trials", o.sigma0_trials, "Rejection draws per bisection step")
      ->capture_default_str();
  app->add_option("--max-escalations", o.max_escalations,
                  "Compensated replays before a velocity resample")
      ->capture_default_str();
}

std::optional<double> parse_rate(const std::string& s) {
  if (s == "auto") return std::nullopt;
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size() || !(v >= 0.0))
    throw std::invalid_argument("--lambda-refresh must be 'auto' or a non-negative number");
  return v;
}

EstimatorConfig make_config(const CommonOptions& c, const EstimatorOptions& o) {
  EstimatorConfig cfg;
  cfg.total_budget = o.samples;
  cfg.seed = c.seed;
  cfg.c_min = o.cmin;
  cfg.c_max = o.cmax;
  if (o.schedule_factor > 0.0) cfg.schedule_factor = o.schedule_factor;
  cfg.final_mode = o.final_mode == "flat" ? FinalMode::flat_approx : FinalMode::exact_ratio;
  cfg.pilot_len = o.pilot_len;
  cfg.lambda_refresh = parse_rate(o.lambda_refresh);
  cfg.sigma0_trials = o.sigma0_trials;
  cfg.max_escalations = o.max_escalations;
  cfg.validate();
  return cfg;
}

struct LoadedModel {
  std::string name;
  Model model;
};

LoadedModel load_model(const CommonOptions& o, Index dim) {
  std::string name = o.model;
  std::string path = o.file;
  if (name.rfind("file:", 0) == 0) {
    path = name.substr(5);
    name = "file";
  }
  if (name == "cube") return {name, make_cube(dim)};
  if (name == "std-simplex") return {name, make_std_simplex(dim)};
  if (name == "iso-simplex") return {name, make_iso_simplex(dim)};
  if (name == "file") {
    if (path.empty()) throw std::invalid_argument("--model file needs --file <path>");
    HPolytope P = read_polytope(path);
    ModelInfo info;
    info.kind = ModelKind::file;
    info.bounding_radius = estimate_bounding_radius(P);
    return {"file:" + path, Model{std::move(P), info}};
  }
  throw std::invalid_argument("unknown model '" + o.model + "'");
}

// Writes to --out or stdout.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw std::runtime_error("cannot write '" + path + "'");
    }
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

int cmd_volume(const CommonOptions& c, const EstimatorOptions& o) {
  if (c.format != "json" && c.format != "csv")
    throw std::invalid_argument("--format must be json or csv");
  const EstimatorConfig cfg = make_config(c, o);
  const LoadedModel m = load_model(c, c.dim);
  RunReport report;
  report.model = m.name;
  report.dim = m.model.polytope.dim();
  report.seed = c.seed;
  report.N = o.samples;
  report.repeats = o.repeats;
  report.exact_log_volume = m.model.info.exact_log_volume;
  report.results = run_repeats(m.model.polytope, m.model.info, cfg, o.repeats, o.jobs);
  report.aggregate = aggregate(report.results);
  Output out(c.out);
  if (c.format == "json")
    out.stream() << to_json(report).dump(2) << '\n';
  else
    write_csv(report, out.stream());
  return 0;
}

struct BenchmarkOptions {
  std::vector<Index> dims{50, 70, 100, 140, 175, 250};
  std::uint64_t n0 = 10000;
  double target_error = 0.04;
  double error_band = 0.01;
  double min_delta = 0.05;
  int max_probes = 30;
  double time_cap = 0.0;
};

int cmd_benchmark(const CommonOptions& c, const EstimatorOptions& o, const BenchmarkOptions& b) {
  const std::string model = c.model;
  if (model.rfind("file", 0) == 0)
    throw std::invalid_argument("benchmark needs a built-in model with a known volume");
  std::vector<BenchmarkRecord> records;
  for (const Index d : b.dims) {
    const LoadedModel m = load_model(c, d);
    SearchOptions so;
    so.N0 = b.n0;
    so.target = b.target_error;
    so.band = b.error_band;
    so.min_delta = b.min_delta;
    so.max_probes = b.max_probes;
    so.time_cap_s = b.time_cap;
    std::vector<std::vector<RepeatResult>> runs;
    auto probe = [&](std::uint64_t N) {
      EstimatorOptions oo = o;
      oo.samples = N;
      const EstimatorConfig cfg = make_config(c, oo);
      runs.push_back(run_repeats(m.model.polytope, m.model.info, cfg, o.repeats, o.jobs));
      const Aggregate a = aggregate(runs.back());
      std::cerr << "[benchmark] d=" << d << " N=" << N << " median_err=" << *a.median_rel_error
                << " median_time=" << a.median_time_s << "s\n";
      return BudgetProbe{N, *a.median_rel_error, a.median_time_s};
    };
    const SearchResult sr = search_budget(probe, so);
    BenchmarkRecord rec;
    rec.dim = d;
    rec.N_final = sr.N_final;
    rec.median_rel_error = sr.final_probe.median_error;
    rec.median_time_s = sr.final_probe.median_time;
    rec.complete = sr.complete;
    rec.probes = sr.probes;
    for (std::size_t i = 0; i < sr.probes.size(); ++i) {
      if (sr.probes[i].N != sr.N_final) continue;
      for (const auto& r : runs[i]) {
        rec.log_volumes.push_back(r.estimate.log_volume);
        rec.M_total += r.estimate.numerics.m_count;
        rec.R_total += r.estimate.numerics.r_count;
      }
      break;
    }
    records.push_back(std::move(rec));
  }
  const BenchmarkSummary s = summarize(std::move(records));

  nlohmann::json j;
  j["model"] = c.model;
  j["seed"] = c.seed;
  j["repeats"] = o.repeats;
  j["target_error"] = b.target_error;
  j["error_band"] = b.error_band;
  j["incomplete"] = !s.complete;
  j["records"] = nlohmann::json::array();
  for (const auto& r : s.records) {
    nlohmann::json probes = nlohmann::json::array();
    for (const auto& p : r.probes)
      probes.push_back({{"N", p.N}, {"median_rel_error", p.median_error},
                        {"median_time_s", p.median_time}});
    j["records"].push_back({{"dim", r.dim},
                            {"N_final", r.N_final},
                            {"median_rel_error", r.median_rel_error},
                            {"median_time_s", r.median_time_s},
                            {"log_volumes", r.log_volumes},
                            {"numerics", {{"M", r.M_total}, {"R", r.R_total}}},
                            {"complete", r.complete},
                            {"regression_inputs",
                             {{"log_dim", std::log(static_cast<double>(r.dim))},
                              {"log_time", std::log(r.median_time_s)},
                              {"log_N", std::log(static_cast<double>(r.N_final))}}},
                            {"probes", probes}});
  }
  auto fit_json = [](const std::optional<LinearFit>& f) {
    if (!f) return nlohmann::json(nullptr);
    return nlohmann::json{{"slope", f->slope}, {"intercept", f->intercept}, {"r2", f->r2}};
  };
  j["regression"] = {{"time_vs_dim", fit_json(s.time_fit)},
                     {"samples_vs_dim", fit_json(s.samples_fit)}};
  Output out(c.out);
  out.stream() << j.dump(2) << '\n';
  return s.complete ? 0 : 2;
}

struct SampleOptions {
  double sigma = 0.0;
  std::uint64_t samples = 1000;
  std::string lambda_refresh = "1.0";
  double lambda_out = 0.0;  // 0: tuned
  std::uint64_t burn_in_events = 10000;
  std::string event_log;
};

int cmd_sample(const CommonOptions& c, const SampleOptions& s) {
  if (!(s.sigma > 0.0)) throw std::invalid_argument("--sigma must be positive");
  const LoadedModel m = load_model(c, c.dim);
  const HPolytope& P = m.model.polytope;
  const Index d = P.dim();
  const GaussianTarget target = GaussianTarget::from_sigma(s.sigma);
  BpsState state =
      BpsState::start(P, Vector::Zero(d), derive_stream(c.seed, 0, 0, StreamRole::sample));

  SamplerParams params;
  const std::optional<double> fixed = parse_rate(s.lambda_refresh);
  params.lambda_refresh = fixed.value_or(1.0);
  const EventCounters before = state.counters;
  const double elapsed = run_events(state, P, target, params.lambda_refresh,
                                    std::max<std::uint64_t>(s.burn_in_events, 1000));
  params.lambda_out = s.lambda_out > 0.0
                          ? s.lambda_out
                          : tune_output_rate((state.counters - before).events(), elapsed, d);
  if (!fixed) {
    auto pilot = [&](double rate) {
      SamplerParams p = params;
      p.lambda_refresh = rate;
      const EventCounters c0 = state.counters;
      SampleRun run = sample_n(state, P, target, p, 100);
      return ess_report(run.samples, 0.0, detail::work_units(P, state.counters - c0));
    };
    params.lambda_refresh = tune_refresh_rate(pilot, params.lambda_refresh).lambda_refresh;
  }

  Output out(c.out);
  std::ostream& os = out.stream();
  os.precision(17);
  for (Index j = 0; j < d; ++j) os << (j ? "," : "") << 'x' << (j + 1);
  os << '\n';
  auto sink = [&](const Vector& x) {
    for (Index j = 0; j < d; ++j) os << (j ? "," : "") << x[j];
    os << '\n';
  };
  NumericsStats stats;
  if (!s.event_log.empty()) {
    std::ofstream log(s.event_log);
    if (!log) throw std::runtime_error("cannot write '" + s.event_log + "'");
    log.precision(17);
    log << "time,kind";
    for (Index j = 0; j < d; ++j) log << ",x" << (j + 1);
    log << '\n';
    auto observe = [&](EventKind kind, double t, const Vector& x) {
      log << t << ',' << to_string(kind);
      for (Index j = 0; j < d; ++j) log << ',' << x[j];
      log << '\n';
    };
    stats = run_safeguarded(state, P, target, params, s.samples, sink, observe);
  } else {
    stats = run_safeguarded(state, P, target, params, s.samples, sink);
  }
  std::cerr << "lambda_out=" << params.lambda_out << " lambda_refresh=" << params.lambda_refresh
            << " M=" << stats.m_count << " R=" << stats.r_count << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Polytope volume estimation with the Bouncy Particle Sampler"};
  app.require_subcommand(1);

  CommonOptions vol_common;
  EstimatorOptions vol_est;
  auto* vol = app.add_subcommand("volume", "Estimate the volume with repeated runs");
  add_common(vol, vol_common);
  add_estimator(vol, vol_est, true);
  vol->add_option("--format", vol_common.format, "json | csv")
      ->capture_default_str()
      ->check(CLI::IsMember({"json", "csv"}));

  CommonOptions bench_common;
  EstimatorOptions bench_est;
  BenchmarkOptions bench;
  auto* bm = app.add_subcommand("benchmark", "Search the budget reaching a target error per dimension");
  add_common(bm, bench_common);
  add_estimator(bm, bench_est, false);
  bm->add_option("--dims", bench.dims, "Dimensions")->delimiter(',')->capture_default_str();
  bm->add_option("--n0", bench.n0, "Initial budget")->capture_default_str();
  bm->add_option("--target-error", bench.target_error, "Target median relative error")
      ->capture_default_str();
  bm->add_option("--error-band", bench.error_band, "Accepted band around the target")
      ->capture_default_str();
  bm->add_option("--min-delta", bench.min_delta, "Stop when successive N differ by less")
      ->capture_default_str();
  bm->add_option("--max-probes", bench.max_probes, "Budgets tried per dimension")
      ->capture_default_str();
  bm->add_option("--time-cap", bench.time_cap, "Seconds per dimension before giving up (0: none)")
      ->capture_default_str();

  CommonOptions samp_common;
  SampleOptions samp;
  auto* sp = app.add_subcommand("sample", "Write sampler output as CSV");
  add_common(sp, samp_common);
  sp->add_option("--sigma", samp.sigma, "Standard deviation of the target Gaussian")->required();
  sp->add_option("--samples", samp.samples, "Number of output samples")->capture_default_str();
  sp->add_option("--lambda-refresh", samp.lambda_refresh, "auto | refresh rate")
      ->capture_default_str();
  sp->add_option("--lambda-out", samp.lambda_out, "Output rate (0: tuned)")->capture_default_str();
  sp->add_option("--burn-in-events", samp.burn_in_events, "Events simulated before output")
      ->capture_default_str();
  sp->add_option("--event-log", samp.event_log, "CSV of every event (time, kind, position)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (vol->parsed()) return cmd_volume(vol_common, vol_est);
    if (bm->parsed()) return cmd_benchmark(bench_common, bench_est, bench);
    if (sp->parsed()) return cmd_sample(samp_common, samp);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
