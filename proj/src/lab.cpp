#include "speclab/lab.hpp"

#include <chrono>
#include <cmath>
#include <functional>

#include "speclab/parallel.hpp"
#include "speclab/quantize.hpp"

namespace speclab {

namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr const char* kRngName = "splitmix64-counter";

Json map_to_json(const HyperbolicToralAutomorphism& m) {
  return Json::array({m.a, m.b, m.c, m.d});
}

HyperbolicToralAutomorphism map_from_json(const Json& j) {
  require(j.is_array() && j.size() == 4, Err::ConfigParse, "map must be [a,b,c,d]");
  return make_map(j.at(0).get<std::int64_t>(), j.at(1).get<std::int64_t>(),
                  j.at(2).get<std::int64_t>(), j.at(3).get<std::int64_t>());
}

template <typename T>
T get_or(const Json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  return j.at(key).get<T>();
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const Json& j) {
  require(j.is_object(), Err::ConfigParse, "config must be a JSON object");
  require(j.contains("map"), Err::MissingField, "config.map");
  require(j.contains("observable"), Err::MissingField, "config.observable");

  ExperimentConfig c;
  c.map = map_from_json(j.at("map"));
  c.observable = TorusObservable::from_json(j.at("observable"));
  if (j.contains("damping")) {
    c.damping = TorusObservable::from_json(j.at("damping"));
    c.damping_distinct = true;
  } else {
    c.damping = c.observable;
    c.damping_distinct = false;
  }

  c.N_list = get_or<std::vector<std::int64_t>>(j, "N_list", {64, 128, 256});
  c.T_list = get_or<std::vector<std::int64_t>>(j, "T_list", {16, 32, 64});
  c.gamma = get_or<double>(j, "gamma", 0.25);
  c.mdp_epsilons = get_or<std::vector<double>>(j, "mdp_epsilons", {0.5});
  c.mdp_samples = get_or<std::int64_t>(j, "mdp_samples", 100000);
  c.variance_T = get_or<std::int64_t>(j, "variance_T", 100);
  c.variance_samples = get_or<std::int64_t>(j, "variance_samples", 100000);
  c.max_lag = get_or<std::int64_t>(j, "max_lag", 32);
  c.xi_max = get_or<double>(j, "xi_max", 0.5);
  c.xi_step = get_or<double>(j, "xi_step", 0.05);
  c.K_op = get_or<std::int64_t>(j, "K_op", 32);
  c.eig_tol = get_or<double>(j, "eig_tol", 1e-11);
  c.alpha = get_or<double>(j, "alpha", 0.5);
  c.concentration_epsilon = get_or<double>(j, "concentration_epsilon", 0.1);
  c.seed = get_or<std::uint64_t>(j, "seed", 1);
  c.output_dir = get_or<std::string>(j, "output_dir", "out");
  return c;
}

Json ExperimentConfig::canonical_json() const {
  Json j;
  j["map"] = map_to_json(map);
  j["observable"] = observable.to_json();
  j["damping"] = damping.to_json();  // resolved, so implicit defaults hash equally
  j["N_list"] = N_list;
  j["T_list"] = T_list;
  j["gamma"] = gamma;
  j["mdp_epsilons"] = mdp_epsilons;
  j["mdp_samples"] = mdp_samples;
  j["variance_T"] = variance_T;
  j["variance_samples"] = variance_samples;
  j["max_lag"] = max_lag;
  j["xi_max"] = xi_max;
  j["xi_step"] = xi_step;
  j["K_op"] = K_op;
  j["eig_tol"] = eig_tol;
  j["alpha"] = alpha;
  j["concentration_epsilon"] = concentration_epsilon;
  j["seed"] = seed;
  return j;
}

Json ExperimentConfig::to_json() const {
  Json j = canonical_json();
  j["output_dir"] = output_dir;
  return j;
}

std::string ExperimentConfig::hash() const { return hex16(fnv1a64(canonical_json().dump())); }

void ExperimentConfig::validate() const {
  // classical side
  require(!observable.empty(), Err::MissingField, "observable has no modes");
  require(gamma > 0.0 && gamma < 0.5, Err::BadScaling, "gamma must lie in (0, 1/2)");
  for (double e : mdp_epsilons) require(e > 0.0, Err::BadEpsilon, "mdp epsilon must be positive");
  require(!mdp_epsilons.empty(), Err::BadEpsilon, "need at least one mdp epsilon");
  require(mdp_samples >= 1000, Err::TooFewSamples, "mdp_samples must be at least 1000");
  require(variance_samples >= 1000, Err::TooFewSamples,
          "variance_samples must be at least 1000");
  require(variance_T >= 2, Err::BadWindowLength, "variance_T must be at least 2");
  require(T_list.size() >= 3, Err::BadWindowLength, "T_list needs at least 3 entries");
  for (std::size_t i = 0; i < T_list.size(); ++i) {
    require(T_list[i] >= 2 && T_list[i] % 2 == 0, Err::OddWindow,
            "T_list entries must be even and >= 2");
    if (i > 0) require(T_list[i] > T_list[i - 1], Err::BadWindowLength, "T_list must ascend");
  }
  require(max_lag >= mode_escape_time(map, observable), Err::LagTooSmall,
          "max_lag below the certified mode escape time");

  // transfer operator
  require(xi_step > 0.0 && xi_max >= xi_step, Err::BadXiGrid,
          "xi grid needs step > 0 and max >= step");
  require(xi_max * observable.sup_norm_bound() <= 30.0, Err::WeightOverflow,
          "xi_max sup|q| exceeds the overflow guard");
  require(K_op >= std::max<std::int64_t>(2, 2 * observable.radius()), Err::BoxTooSmall,
          "K_op must be at least twice the observable radius");
  require(eig_tol > 1e-14 && eig_tol < 1e-4, Err::BadTolerance,
          "eig_tol must lie in (1e-14, 1e-4)");

  // spectral side
  require(alpha > 0.0 && alpha < 1.0, Err::BadAlpha, "alpha must lie in (0,1)");
  require(concentration_epsilon > 0.0, Err::BadEpsilon,
          "concentration_epsilon must be positive");
  require(N_list.size() >= 3, Err::BadNList, "N_list needs at least 3 entries");
  for (std::size_t i = 0; i < N_list.size(); ++i) {
    require(N_list[i] >= 2, Err::BadNList, "N must be at least 2");
    if (i > 0) require(N_list[i] > N_list[i - 1], Err::BadNList, "N_list must ascend");
    require(quantizable(map, N_list[i]), Err::NotQuantizable,
            "map not quantizable at N = " + std::to_string(N_list[i]));
  }

  // quantum damping: nonnegative, and its symbol must fit below every N
  constexpr int kGrid = 128;
  double gmin = std::numeric_limits<double>::infinity();
  for (int j1 = 0; j1 < kGrid; ++j1)
    for (int j2 = 0; j2 < kGrid; ++j2)
      gmin = std::min(gmin, damping.evaluate({static_cast<double>(j1) / kGrid,
                                              static_cast<double>(j2) / kGrid}));
  require(gmin >= -1e-12, Err::NegativeDamping, "damping must be nonnegative");
  const auto symbol = damping_symbol(damping);
  require(N_list.front() > 2 * symbol.radius(), Err::Aliasing,
          "smallest N cannot hold the damping symbol without aliasing");
}

Json RunManifest::to_json() const {
  Json j;
  j["config_hash"] = config_hash;
  j["generated_at"] = generated_at;
  j["jobs"] = jobs;
  j["rng"] = kRngName;
  j["versions"] = {{"speclab", kVersion},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                 std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)}};
  Json stages_json = Json::array();
  for (const auto& s : stages) {
    Json e;
    e["name"] = s.name;
    e["status"] = s.status;
    e["wall_ms"] = s.wall_ms;
    Json arts = Json::array();
    for (const auto& a : s.artifacts) arts.push_back({{"path", a.path}, {"fnv1a64", a.fnv1a64}});
    e["artifacts"] = arts;
    if (!s.error.empty()) e["error"] = s.error;
    stages_json.push_back(e);
  }
  j["stages"] = stages_json;
  j["warnings"] = warnings;
  return j;
}

void RunManifest::write(const fs::path& output_dir) const {
  write_json_file(output_dir / "manifest.json", to_json());
}

bool RunManifest::verify(const fs::path& output_dir) const {
  for (const auto& s : stages)
    for (const auto& a : s.artifacts) {
      const fs::path p = output_dir / a.path;
      if (!fs::exists(p)) return false;
      if (hex16(fnv1a64_file(p)) != a.fnv1a64) return false;
    }
  return true;
}

// ---------------------------------------------------------------------------
// stage machinery

namespace {

struct StageContext {
  const ExperimentConfig& cfg;
  int jobs;
  fs::path out_dir;
  fs::path cache_dir;
  std::string cache_rel;  // "cache/<hash>"
  Json stage_index;       // persisted per-config record of artifact hashes
  RunManifest manifest;
  ClassicalState classical;
  QuantumState quantum;
  bool have_constant = false;

  fs::path index_path() const { return cache_dir / "stages.json"; }
  void load_index() {
    if (fs::exists(index_path())) {
      try {
        stage_index = read_json_file(index_path());
      } catch (const Error&) {
        stage_index = Json::object();  // stale cache; recompute
      }
    } else {
      stage_index = Json::object();
    }
  }
  void save_index() const { write_json_file(index_path(), stage_index); }
};

using ComputeFn = std::function<std::vector<std::string>(StageContext&)>;  // artifact paths
using StateSaveFn = std::function<Json(const StageContext&)>;
using StateLoadFn = std::function<void(StageContext&, const Json&)>;

// Serves the stage from the cache when every recorded artifact (and the
// state snapshot) matches its hash; otherwise computes and records.
void run_stage(StageContext& ctx, const std::string& name, const ComputeFn& compute,
               const StateSaveFn& save_state, const StateLoadFn& load_state) {
  ManifestStage entry;
  entry.name = name;
  entry.status = "ok";

  const fs::path state_path = ctx.cache_dir / (name + ".state.json");
  bool cache_ok = false;
  if (ctx.stage_index.contains(name)) {
    const Json& rec = ctx.stage_index.at(name);
    cache_ok = true;
    for (const auto& a : rec.at("artifacts")) {
      const fs::path p = ctx.out_dir / a.at("path").get<std::string>();
      if (!fs::exists(p) || hex16(fnv1a64_file(p)) != a.at("fnv1a64").get<std::string>()) {
        cache_ok = false;
        break;
      }
    }
    if (cache_ok && (!fs::exists(state_path) ||
                     hex16(fnv1a64_file(state_path)) != rec.at("state").get<std::string>()))
      cache_ok = false;
  }

  const auto t0 = std::chrono::steady_clock::now();
  if (cache_ok) {
    load_state(ctx, read_json_file(state_path));
    for (const auto& a : ctx.stage_index.at(name).at("artifacts"))
      entry.artifacts.push_back(
          {a.at("path").get<std::string>(), a.at("fnv1a64").get<std::string>()});
    ctx.manifest.cache_hits.push_back(name);
  } else {
    std::vector<std::string> artifact_paths;
    try {
      artifact_paths = compute(ctx);
    } catch (const std::exception& e) {
      entry.status = "FAILED";
      entry.error = e.what();
      entry.wall_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
              .count();
      ctx.manifest.stages.push_back(entry);
      ctx.manifest.write(ctx.out_dir);  // partial outputs stay on disk
      throw;
    }
    write_json_file(state_path, save_state(ctx));
    Json rec;
    rec["state"] = hex16(fnv1a64_file(state_path));
    Json arts = Json::array();
    for (const auto& rel : artifact_paths) {
      const std::string h = hex16(fnv1a64_file(ctx.out_dir / rel));
      entry.artifacts.push_back({rel, h});
      arts.push_back({{"path", rel}, {"fnv1a64", h}});
    }
    rec["artifacts"] = arts;
    ctx.stage_index[name] = rec;
    ctx.save_index();
  }
  entry.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  ctx.manifest.stages.push_back(entry);
  ctx.manifest.write(ctx.out_dir);
}

// ---- variance -------------------------------------------------------------

Json variance_state(const StageContext& ctx) {
  return Json{{"sigma_sq_exact", ctx.classical.sigma_sq_exact},
              {"sigma_sq_mc", ctx.classical.sigma_sq_mc},
              {"mc_std_error", ctx.classical.mc_std_error}};
}

std::vector<std::string> compute_variance(StageContext& ctx) {
  const auto& cfg = ctx.cfg;
  const VarianceResult exact = exact_variance(cfg.map, cfg.observable, cfg.max_lag);
  const VarianceResult mc = mc_variance(cfg.map, cfg.observable, cfg.variance_T,
                                        cfg.variance_samples, cfg.seed, ctx.jobs);
  ctx.classical.sigma_sq_exact = exact.sigma_sq;
  ctx.classical.sigma_sq_mc = mc.sigma_sq;
  ctx.classical.mc_std_error = mc.std_error;

  Json j;
  Json terms = Json::array();
  for (const auto& [t, c] : exact.terms) terms.push_back(Json::array({t, c}));
  j["exact"] = {{"method", exact.method}, {"sigma_sq", exact.sigma_sq}, {"terms", terms}};
  j["monte_carlo"] = {{"method", mc.method},
                      {"sigma_sq", mc.sigma_sq},
                      {"std_error", mc.std_error},
                      {"T", cfg.variance_T},
                      {"samples", cfg.variance_samples},
                      {"seed", cfg.seed}};
  const std::string rel = ctx.cache_rel + "/variance.json";
  write_json_file(ctx.out_dir / rel, j);
  return {rel};
}

// ---- pressure -------------------------------------------------------------

Json pressure_state(const StageContext& ctx) {
  const auto& p = ctx.classical.pressure;
  return Json{{"xi_grid", p.xi_grid},
              {"F_values", p.F_values},
              {"lambda_values", p.lambda_values},
              {"gap_ratios", p.gap_ratios},
              {"sigma_sq_from_pressure", p.sigma_sq_from_pressure}};
}

void load_pressure_state(StageContext& ctx, const Json& j) {
  auto& p = ctx.classical.pressure;
  p.xi_grid = j.at("xi_grid").get<std::vector<double>>();
  p.F_values = j.at("F_values").get<std::vector<double>>();
  p.lambda_values = j.at("lambda_values").get<std::vector<double>>();
  p.gap_ratios = j.at("gap_ratios").get<std::vector<double>>();
  p.sigma_sq_from_pressure = j.at("sigma_sq_from_pressure").get<double>();
}

std::vector<std::string> compute_pressure(StageContext& ctx) {
  const auto& cfg = ctx.cfg;
  const auto grid = symmetric_grid(cfg.xi_max, cfg.xi_step);
  ctx.classical.pressure =
      pressure_curve(cfg.map, cfg.observable, grid, cfg.K_op, cfg.eig_tol, ctx.jobs);
  const auto& curve = ctx.classical.pressure;

  CsvWriter csv({"xi", "F", "lambda", "gap_ratio"});
  for (std::size_t i = 0; i < curve.xi_grid.size(); ++i)
    csv.add_row({format_double(curve.xi_grid[i]), format_double(curve.F_values[i]),
                 format_double(curve.lambda_values[i]), format_double(curve.gap_ratios[i])});
  const std::string rel_csv = ctx.cache_rel + "/pressure.csv";
  write_text_file(ctx.out_dir / rel_csv, csv.str());

  Json meta;
  meta["map"] = map_to_json(cfg.map);
  meta["observable_fnv1a64"] = hex16(fnv1a64(cfg.observable.to_json().dump()));
  meta["K_op"] = cfg.K_op;
  meta["eig_tol"] = cfg.eig_tol;
  meta["sigma_sq_from_pressure"] = curve.sigma_sq_from_pressure;
  meta["log_h_convention"] = "log N (additive log 2pi discarded)";
  const std::string rel_meta = ctx.cache_rel + "/pressure.meta.json";
  write_json_file(ctx.out_dir / rel_meta, meta);
  return {rel_csv, rel_meta};
}

// ---- mdp ------------------------------------------------------------------

Json estimate_to_json(const DeviationEstimate& e) {
  return Json{{"T", e.T},
              {"gamma", e.gamma},
              {"epsilon", e.epsilon},
              {"probability", e.probability},
              {"std_error", e.std_error},
              {"rate", e.rate},
              {"samples", e.samples},
              {"seed", e.seed},
              {"zero_probability_bound", e.zero_probability_bound}};
}

DeviationEstimate estimate_from_json(const Json& j) {
  DeviationEstimate e;
  e.T = j.at("T").get<std::int64_t>();
  e.gamma = j.at("gamma").get<double>();
  e.epsilon = j.at("epsilon").get<double>();
  e.probability = j.at("probability").get<double>();
  e.std_error = j.at("std_error").get<double>();
  e.rate = j.at("rate").get<double>();
  e.samples = j.at("samples").get<std::int64_t>();
  e.seed = j.at("seed").get<std::uint64_t>();
  e.zero_probability_bound = j.at("zero_probability_bound").get<bool>();
  return e;
}

Json mdp_state(const StageContext& ctx) {
  Json arr = Json::array();
  for (const auto& e : ctx.classical.estimates) arr.push_back(estimate_to_json(e));
  return Json{{"estimates", arr}};
}

void load_mdp_state(StageContext& ctx, const Json& j) {
  ctx.classical.estimates.clear();
  for (const auto& e : j.at("estimates")) ctx.classical.estimates.push_back(estimate_from_json(e));
}

std::vector<std::string> compute_mdp(StageContext& ctx) {
  const auto& cfg = ctx.cfg;
  ctx.classical.estimates.clear();
  for (double eps : cfg.mdp_epsilons)
    for (std::int64_t T : cfg.T_list)
      ctx.classical.estimates.push_back(mdp_probability(cfg.map, cfg.observable, T, cfg.gamma,
                                                        eps, cfg.mdp_samples, cfg.seed,
                                                        ctx.jobs));

  CsvWriter csv({"T", "a_T", "epsilon", "probability", "stderr", "rate"});
  for (const auto& e : ctx.classical.estimates)
    csv.add_row({std::to_string(e.T),
                 format_double(std::pow(static_cast<double>(e.T), e.gamma)),
                 format_double(e.epsilon), format_double(e.probability),
                 format_double(e.std_error), format_double(e.rate)});
  const std::string rel_csv = ctx.cache_rel + "/mdp.csv";
  write_text_file(ctx.out_dir / rel_csv, csv.str());

  Json j;
  j["gamma"] = cfg.gamma;
  j["scaling"] = "a(T) = T^gamma";
  Json records = Json::array();
  for (const auto& e : ctx.classical.estimates) records.push_back(estimate_to_json(e));
  j["records"] = records;

  // per-epsilon extrapolated fits whenever every probability is positive
  Json fits = Json::array();
  for (double eps : cfg.mdp_epsilons) {
    std::vector<DeviationEstimate> group;
    for (const auto& e : ctx.classical.estimates)
      if (e.epsilon == eps) group.push_back(e);
    const bool all_positive =
        std::all_of(group.begin(), group.end(), [](const auto& e) { return e.probability > 0; });
    Json f;
    f["epsilon"] = eps;
    const double sigma_sq_exact =
        exact_variance(cfg.map, cfg.observable, cfg.max_lag).sigma_sq;
    if (all_positive && sigma_sq_exact > 0.0 && group.size() >= 3) {
      const auto fit = mdp_rate_fit(group, sigma_sq_exact);
      f["measured_rate"] = fit.measured_rate;
      f["predicted_rate"] = fit.predicted_rate;
      f["relative_error"] = fit.relative_error;
      f["slope"] = fit.slope;
    } else {
      f["skipped"] = all_positive ? "sigma_sq is zero or too few windows"
                                  : "zero-probability estimate present";
    }
    fits.push_back(f);
  }
  j["fits"] = fits;
  const std::string rel_json = ctx.cache_rel + "/mdp.json";
  write_json_file(ctx.out_dir / rel_json, j);
  return {rel_csv, rel_json};
}

// ---- rate function ----------------------------------------------------------

std::vector<std::string> compute_rate_function(StageContext& ctx) {
  const auto& curve = ctx.classical.pressure;
  // interior attainable slope range of the sampled curve
  const std::size_t n = curve.xi_grid.size();
  const double lo =
      (curve.F_values[1] - curve.F_values[0]) / (curve.xi_grid[1] - curve.xi_grid[0]);
  const double hi = (curve.F_values[n - 1] - curve.F_values[n - 2]) /
                    (curve.xi_grid[n - 1] - curve.xi_grid[n - 2]);
  std::vector<double> etas;
  constexpr int kPoints = 41;
  for (int k = 0; k < kPoints; ++k)
    etas.push_back(0.98 * lo + (0.98 * hi - 0.98 * lo) * static_cast<double>(k) /
                                   static_cast<double>(kPoints - 1));
  const RateFunction rate = legendre_fenchel(curve, etas);

  CsvWriter csv({"eta", "I"});
  for (std::size_t i = 0; i < rate.eta_grid.size(); ++i)
    csv.add_row({format_double(rate.eta_grid[i]), format_double(rate.I_values[i])});
  const std::string rel = ctx.cache_rel + "/rate_function.csv";
  write_text_file(ctx.out_dir / rel, csv.str());
  return {rel};
}

// ---- Gartner-Ellis comparison ----------------------------------------------

std::vector<std::string> compute_gartner_ellis(StageContext& ctx) {
  const auto& cfg = ctx.cfg;
  Json j;
  j["rate_route"] = "quadratic(sigma_sq_from_pressure)";
  const double sigma_sq = ctx.classical.pressure.sigma_sq_from_pressure;
  j["sigma_sq_from_pressure"] = sigma_sq;
  if (sigma_sq <= 1e-10) {
    j["skipped"] = "degenerate rescaled cumulant (sigma_sq ~ 0)";
  } else {
    Json comparisons = Json::array();
    for (double eps : cfg.mdp_epsilons) {
      std::vector<DeviationEstimate> group;
      for (const auto& e : ctx.classical.estimates)
        if (e.epsilon == eps) group.push_back(e);
      if (group.empty()) continue;
      const auto quad = quadratic_pressure(sigma_sq, 1.25 * eps, eps / 24.0);
      const auto rate = legendre_fenchel(quad, symmetric_grid(1.2 * eps, eps / 24.0));
      const auto cmp = gartner_ellis_check(rate, group);
      Json entry;
      entry["epsilon"] = eps;
      entry["predicted_rate"] = cmp.predicted_rate;
      entry["extrapolated_rate"] = cmp.extrapolated_rate;
      entry["relative_error"] = cmp.relative_error;
      Json per = Json::array();
      for (const auto& e : cmp.entries)
        per.push_back({{"T", e.T},
                       {"empirical_rate", e.empirical_rate},
                       {"predicted_rate", e.predicted_rate},
                       {"relative_error", e.relative_error},
                       {"zero_probability_bound", e.zero_probability_bound}});
      entry["per_window"] = per;
      comparisons.push_back(entry);
    }
    j["comparisons"] = comparisons;
  }
  const std::string rel = ctx.cache_rel + "/gartner_ellis.json";
  write_json_file(ctx.out_dir / rel, j);
  return {rel};
}

// ---- spectral constant -------------------------------------------------------

Json constant_state(const StageContext& ctx) {
  const auto& sc = ctx.classical.constant;
  return Json{{"lambda0", sc.lambda0},
              {"sigma_sq", sc.sigma_sq},
              {"c", sc.c_infinite ? Json() : Json(sc.c)},
              {"c_infinite", sc.c_infinite}};
}

void load_constant_state(StageContext& ctx, const Json& j) {
  auto& sc = ctx.classical.constant;
  sc.lambda0 = j.at("lambda0").get<double>();
  sc.sigma_sq = j.at("sigma_sq").get<double>();
  sc.c_infinite = j.at("c_infinite").get<bool>();
  sc.c = sc.c_infinite ? std::numeric_limits<double>::infinity() : j.at("c").get<double>();
  ctx.have_constant = true;
}

std::vector<std::string> compute_constant(StageContext& ctx) {
  const double sigma_sq_exact =
      exact_variance(ctx.cfg.map, ctx.cfg.observable, ctx.cfg.max_lag).sigma_sq;
  ctx.classical.constant =
      concentration_constant_from(ctx.cfg.map.expansion_rate, sigma_sq_exact);
  ctx.have_constant = true;
  const std::string rel = ctx.cache_rel + "/spectral_constant.json";
  write_json_file(ctx.out_dir / rel, constant_state(ctx));
  return {rel};
}

// ---- quantum spectra ----------------------------------------------------------

Json spectrum_state(const StageContext& ctx) {
  Json arr = Json::array();
  for (const auto& s : ctx.quantum.samples)
    arr.push_back(Json{{"N", s.N},
                       {"center", s.center},
                       {"alpha", s.alpha},
                       {"width", s.width},
                       {"rates", s.rates},
                       {"warnings", s.warnings}});
  return Json{{"samples", arr}};
}

void load_spectrum_state(StageContext& ctx, const Json& j) {
  ctx.quantum.samples.clear();
  for (const auto& e : j.at("samples")) {
    DecayRateSample s;
    s.N = e.at("N").get<std::int64_t>();
    s.center = e.at("center").get<double>();
    s.alpha = e.at("alpha").get<double>();
    s.width = e.at("width").get<double>();
    s.rates = e.at("rates").get<std::vector<double>>();
    s.warnings = e.at("warnings").get<std::vector<std::string>>();
    ctx.quantum.samples.push_back(std::move(s));
  }
}

std::vector<std::string> compute_spectrum(StageContext& ctx) {
  const auto& cfg = ctx.cfg;
  const std::string damping_hash = hex16(fnv1a64(cfg.damping.to_json().dump()));

  ctx.quantum.samples.assign(cfg.N_list.size(), {});
  std::vector<std::vector<Complex>> values(cfg.N_list.size());
  parallel_for(cfg.N_list.size(), ctx.jobs, [&](std::size_t i) {
    const QuantizedSystem sys = damped_propagator(cfg.map, cfg.damping, cfg.N_list[i]);
    values[i] = spectrum(sys);
    ctx.quantum.samples[i] = decay_rates(sys, cfg.damping, cfg.alpha);
  });

  std::vector<std::string> artifacts;
  for (std::size_t i = 0; i < cfg.N_list.size(); ++i) {
    const std::int64_t N = cfg.N_list[i];
    CsvWriter csv({"re", "im", "modulus", "decay_rate"});
    for (const auto& z : values[i]) {
      const double mod = std::abs(z);
      csv.add_row({format_double(z.real()), format_double(z.imag()), format_double(mod),
                   format_double(-std::log(mod))});
    }
    const std::string rel_csv = ctx.cache_rel + "/eigenvalues_N" + std::to_string(N) + ".csv";
    write_text_file(ctx.out_dir / rel_csv, csv.str());
    Json meta;
    meta["N"] = N;
    meta["map"] = map_to_json(cfg.map);
    meta["damping_fnv1a64"] = damping_hash;
    meta["solver"] = "eigen-complex-schur";
    meta["sorted_by"] = "modulus descending, phase ascending";
    const std::string rel_meta =
        ctx.cache_rel + "/eigenvalues_N" + std::to_string(N) + ".meta.json";
    write_json_file(ctx.out_dir / rel_meta, meta);
    artifacts.push_back(rel_csv);
    artifacts.push_back(rel_meta);
  }
  return artifacts;
}

// ---- concentration -------------------------------------------------------------

Json report_to_json(const ConcentrationReport& r) {
  Json rows = Json::array();
  for (const auto& row : r.rows)
    rows.push_back(Json{{"N", row.N},
                        {"width", row.width},
                        {"count_outside", row.count_outside},
                        {"fraction_outside", row.fraction_outside},
                        {"count_above", row.count_above},
                        {"count_below", row.count_below},
                        {"bound_value", row.bound_value}});
  Json j;
  j["rows"] = rows;
  j["alpha"] = r.alpha;
  if (r.epsilon_fixed) j["epsilon_fixed"] = *r.epsilon_fixed;
  if (r.fitted_exponent) j["fitted_exponent"] = *r.fitted_exponent;
  j["perfect_concentration"] = r.perfect_concentration;
  j["monotone_up_to_noise"] = r.monotone_up_to_noise;
  if (r.empirical_center_drift) j["empirical_center_drift"] = *r.empirical_center_drift;
  j["warnings"] = r.warnings;
  return j;
}

ConcentrationReport report_from_json(const Json& j) {
  ConcentrationReport r;
  for (const auto& e : j.at("rows")) {
    ConcentrationRow row;
    row.N = e.at("N").get<std::int64_t>();
    row.width = e.at("width").get<double>();
    row.count_outside = e.at("count_outside").get<std::int64_t>();
    row.fraction_outside = e.at("fraction_outside").get<double>();
    row.count_above = e.at("count_above").get<std::int64_t>();
    row.count_below = e.at("count_below").get<std::int64_t>();
    row.bound_value = e.at("bound_value").get<double>();
    r.rows.push_back(row);
  }
  r.alpha = j.at("alpha").get<double>();
  if (j.contains("epsilon_fixed")) r.epsilon_fixed = j.at("epsilon_fixed").get<double>();
  if (j.contains("fitted_exponent")) r.fitted_exponent = j.at("fitted_exponent").get<double>();
  r.perfect_concentration = j.at("perfect_concentration").get<bool>();
  r.monotone_up_to_noise = j.at("monotone_up_to_noise").get<bool>();
  if (j.contains("empirical_center_drift"))
    r.empirical_center_drift = j.at("empirical_center_drift").get<double>();
  r.warnings = j.at("warnings").get<std::vector<std::string>>();
  return r;
}

Json concentration_state(const StageContext& ctx) {
  return Json{{"fixed", report_to_json(ctx.quantum.fixed_report)},
              {"shrinking", report_to_json(ctx.quantum.shrinking_report)}};
}

void load_concentration_state(StageContext& ctx, const Json& j) {
  ctx.quantum.fixed_report = report_from_json(j.at("fixed"));
  ctx.quantum.shrinking_report = report_from_json(j.at("shrinking"));
}

std::string write_report_csv(const StageContext& ctx, const ConcentrationReport& report,
                             const std::string& stem) {
  CsvWriter csv({"N", "log_N", "width", "fraction_outside", "bound_value"});
  for (const auto& row : report.rows)
    csv.add_row({std::to_string(row.N),
                 format_double(std::log(static_cast<double>(row.N))),
                 format_double(row.width), format_double(row.fraction_outside),
                 format_double(row.bound_value)});
  const std::string rel = ctx.cache_rel + "/" + stem + ".csv";
  write_text_file(ctx.out_dir / rel, csv.str());
  return rel;
}

std::vector<std::string> compute_concentration(StageContext& ctx) {
  const auto& cfg = ctx.cfg;
  // the classically computed constant when the full pipeline ran; otherwise
  // the damping's own exact-lattice constant
  const SpectralConstant constant =
      ctx.have_constant ? ctx.classical.constant
                        : concentration_constant(cfg.map, cfg.damping);

  ctx.quantum.fixed_report = concentration_report(
      ctx.quantum.samples, WindowSpec::fixed(cfg.concentration_epsilon), constant);
  ctx.quantum.shrinking_report =
      concentration_report(ctx.quantum.samples, WindowSpec::shrinking(), constant);

  const std::string rel_fixed =
      write_report_csv(ctx, ctx.quantum.fixed_report, "concentration_fixed");
  const std::string rel_shrink =
      write_report_csv(ctx, ctx.quantum.shrinking_report, "concentration_shrinking");

  Json j;
  j["fixed"] = report_to_json(ctx.quantum.fixed_report);
  j["shrinking"] = report_to_json(ctx.quantum.shrinking_report);
  j["constant"] = {{"lambda0", constant.lambda0},
                   {"sigma_sq", constant.sigma_sq},
                   {"c", constant.c_infinite ? Json() : Json(constant.c)},
                   {"c_infinite", constant.c_infinite}};
  j["log_h_convention"] = "log N (additive log 2pi discarded)";
  const std::string rel_json = ctx.cache_rel + "/concentration.json";
  write_json_file(ctx.out_dir / rel_json, j);
  for (const auto& w : ctx.quantum.fixed_report.warnings) ctx.manifest.warnings.push_back(w);
  return {rel_fixed, rel_shrink, rel_json};
}

// ---- join -----------------------------------------------------------------------

std::vector<std::string> compute_join(StageContext& ctx) {
  Json j;
  const auto& sc = ctx.classical.constant;
  j["c"] = sc.c_infinite ? Json() : Json(sc.c);
  j["c_infinite"] = sc.c_infinite;
  j["lambda0"] = sc.lambda0;
  j["sigma_sq_exact"] = ctx.classical.sigma_sq_exact;
  j["sigma_sq_mc"] = ctx.classical.sigma_sq_mc;
  j["sigma_sq_from_pressure"] = ctx.classical.pressure.sigma_sq_from_pressure;
  j["fixed"] = report_to_json(ctx.quantum.fixed_report);
  j["shrinking"] = report_to_json(ctx.quantum.shrinking_report);
  const std::string rel = ctx.cache_rel + "/run_summary.json";
  write_json_file(ctx.out_dir / rel, j);
  return {rel};
}

// ---- dispatch --------------------------------------------------------------------

void dispatch_stage(StageContext& ctx, const std::string& name) {
  auto noop_state = [](const StageContext&) { return Json::object(); };
  auto noop_load = [](StageContext&, const Json&) {};
  if (name == "variance") {
    run_stage(ctx, name, compute_variance, variance_state, [](StageContext& c, const Json& j) {
      c.classical.sigma_sq_exact = j.at("sigma_sq_exact").get<double>();
      c.classical.sigma_sq_mc = j.at("sigma_sq_mc").get<double>();
      c.classical.mc_std_error = j.at("mc_std_error").get<double>();
    });
  } else if (name == "pressure") {
    run_stage(ctx, name, compute_pressure, pressure_state, load_pressure_state);
  } else if (name == "mdp") {
    run_stage(ctx, name, compute_mdp, mdp_state, load_mdp_state);
  } else if (name == "rate_function") {
    run_stage(ctx, name, compute_rate_function, noop_state, noop_load);
  } else if (name == "gartner_ellis") {
    run_stage(ctx, name, compute_gartner_ellis, noop_state, noop_load);
  } else if (name == "constant") {
    run_stage(ctx, name, compute_constant, constant_state, load_constant_state);
  } else if (name == "spectrum") {
    run_stage(ctx, name, compute_spectrum, spectrum_state, load_spectrum_state);
  } else if (name == "concentration") {
    run_stage(ctx, name, compute_concentration, concentration_state, load_concentration_state);
  } else if (name == "join") {
    run_stage(ctx, name, compute_join, noop_state, noop_load);
  } else {
    fail(Err::ConfigParse, "unknown stage: " + name);
  }
}

}  // namespace

std::vector<std::string> classical_stage_names() {
  return {"variance", "pressure", "mdp", "rate_function", "gartner_ellis", "constant"};
}

std::vector<std::string> quantum_stage_names() { return {"spectrum", "concentration"}; }

RunManifest run_stages(const ExperimentConfig& config, const std::vector<std::string>& stages,
                       int jobs) {
  require(jobs >= 1, Err::BadJobs, "jobs must be >= 1");
  config.validate();
  StageContext ctx{config,
                   jobs,
                   fs::path(config.output_dir),
                   fs::path(config.output_dir) / "cache" / config.hash(),
                   "cache/" + config.hash(),
                   Json::object(),
                   RunManifest{},
                   ClassicalState{},
                   QuantumState{},
                   false};
  fs::create_directories(ctx.cache_dir);
  ctx.load_index();
  ctx.manifest.config_hash = config.hash();
  ctx.manifest.generated_at = iso8601_now();
  ctx.manifest.jobs = jobs;
  for (const auto& name : stages) dispatch_stage(ctx, name);
  ctx.manifest.write(ctx.out_dir);
  return ctx.manifest;
}

RunManifest run_classical(const ExperimentConfig& config, int jobs) {
  return run_stages(config, classical_stage_names(), jobs);
}

RunManifest run_quantum(const ExperimentConfig& config, int jobs) {
  return run_stages(config, quantum_stage_names(), jobs);
}

RunManifest run_full(const ExperimentConfig& config, int jobs) {
  auto stages = classical_stage_names();
  for (const auto& s : quantum_stage_names()) stages.push_back(s);
  stages.push_back("join");
  return run_stages(config, stages, jobs);
}

}  // namespace speclab
