// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 mvx-avgfilter contributors
#include "mvx/config.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mvx/error.hpp"
#include "mvx/io.hpp"

namespace mvx {

using json = nlohmann::json;

const char* command_name(Command command) {
  switch (command) {
    case Command::Simulate: return "simulate";
    case Command::Frozen: return "frozen";
    case Command::Bbar: return "bbar";
    case Command::Filter: return "filter";
    case Command::SweepAveraging: return "sweep-averaging";
    case Command::SweepFilter: return "sweep-filter";
    case Command::Probe: return "probe";
  }
  return "?";
}

const char* format_name(OutputFormat format) {
  switch (format) {
    case OutputFormat::Csv: return "csv";
    case OutputFormat::Json: return "json";
    case OutputFormat::Both: return "both";
  }
  return "?";
}

namespace {

Command command_from(std::string_view s, const std::string& key) {
  for (Command c : {Command::Simulate, Command::Frozen, Command::Bbar, Command::Filter,
                    Command::SweepAveraging, Command::SweepFilter, Command::Probe})
    if (s == command_name(c)) return c;
  fail(ErrorCode::ParseError, "key '" + key + "': unknown command '" + std::string(s) + "'");
}

OutputFormat format_from(std::string_view s, const std::string& key) {
  for (OutputFormat f : {OutputFormat::Csv, OutputFormat::Json, OutputFormat::Both})
    if (s == format_name(f)) return f;
  fail(ErrorCode::ParseError, "key '" + key + "': unknown format '" + std::string(s) + "'");
}

OracleMode oracle_from(std::string_view s, const std::string& key) {
  if (s == "estimated") return OracleMode::Estimated;
  if (s == "analytic-linear") return OracleMode::AnalyticLinear;
  if (s == "user")
    fail(ErrorCode::ValidationError, "oracle mode 'user' is only available through the library");
  fail(ErrorCode::ParseError, "key '" + key + "': unknown oracle mode '" + std::string(s) + "'");
}

SensorKind sensor_from(std::string_view s, const std::string& key) {
  if (s == "tanh") return SensorKind::Tanh;
  if (s == "linear") return SensorKind::Linear;
  fail(ErrorCode::ParseError, "key '" + key + "': unknown sensor '" + std::string(s) + "'");
}

const char* sensor_name(SensorKind k) { return k == SensorKind::Tanh ? "tanh" : "linear"; }

// Typed access to one JSON object that rejects unknown keys on finish().
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(ErrorCode::ParseError, "key '" + where() + "': expected an object");
  }

  bool has(const char* key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  std::string key_path(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  void number(const char* key, double& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_number()) type_error(key, "a number");
    out = v.get<double>();
  }

  void number(const char* key, std::optional<double>& out) {
    if (!has(key)) return;
    double v = 0.0;
    number(key, v);
    out = v;
  }

  template <class U>
  void count(const char* key, U& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_number_unsigned()) type_error(key, "a non-negative integer");
    out = static_cast<U>(v.get<std::uint64_t>());
  }

  void text(const char* key, std::string& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_string()) type_error(key, "a string");
    out = v.get<std::string>();
  }

  void numbers(const char* key, std::vector<double>& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_array()) type_error(key, "an array of numbers");
    out.clear();
    for (const auto& e : v) {
      if (!e.is_number()) type_error(key, "an array of numbers");
      out.push_back(e.get<double>());
    }
  }

  std::optional<Reader> child(const char* key) {
    if (!has(key)) return std::nullopt;
    return Reader(j_.at(key), key_path(key));
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.contains(it.key()))
        fail(ErrorCode::ParseError, "unknown key '" + key_path(it.key().c_str()) + "'");
  }

 private:
  std::string where() const { return path_.empty() ? "<root>" : path_; }
  [[noreturn]] void type_error(const char* key, const char* expected) const {
    fail(ErrorCode::ParseError, "key '" + key_path(key) + "': expected " + expected);
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_model(Reader r, ModelSection& m) {
  r.text("type", m.type);
  r.count("n", m.n);
  r.count("m", m.m);
  r.count("l", m.l);
  r.numbers("x0", m.x0);
  r.numbers("z0", m.z0);
  if (auto p = r.child("params")) {
    auto& q = m.params;
    for (auto [k, v] : {std::pair{"a11", &q.a11}, {"a12", &q.a12}, {"a13", &q.a13},
                        {"s1", &q.s1}, {"gamma", &q.gamma}, {"c1", &q.c1}, {"c2", &q.c2},
                        {"c3", &q.c3}, {"s2", &q.s2}, {"hscale", &q.hscale}})
      p->number(k, *v);
    std::string sensor = sensor_name(q.sensor);
    p->text("sensor", sensor);
    q.sensor = sensor_from(sensor, p->key_path("sensor"));
    p->finish();
  }
  r.finish();
}

void read_sde(Reader r, SdeConfig& s) {
  r.number("epsilon", s.epsilon);
  r.number("T", s.T);
  r.number("dt_macro", s.dt_macro);
  r.count("micro_substeps", s.micro_substeps);
  r.count("N", s.N);
  r.number("delta_eps", s.delta_eps);
  r.finish();
}

void read_frozen(Reader r, FrozenRunConfig& f) {
  r.count("M", f.M);
  r.number("dt", f.dt);
  r.number("burn_in", f.burn_in);
  r.number("avg_window", f.avg_window);
  r.finish();
}

void read_filter(Reader r, FilterConfig& f) {
  r.count("Nf", f.Nf);
  r.number("resample_threshold", f.resample_threshold);
  std::string functional = functional_name(f.functional);
  r.text("functional", functional);
  try {
    f.functional = functional_from_name(functional);
  } catch (const Error&) {
    fail(ErrorCode::ParseError,
         "key '" + r.key_path("functional") + "': unknown functional '" + functional + "'");
  }
  r.number("p", f.p);
  r.finish();
}

void read_sweep(Reader r, SweepSection& s) {
  r.numbers("eps_grid", s.eps_grid);
  r.count("mc_reps", s.mc_reps);
  r.numbers("p_orders", s.p_orders);
  r.finish();
}

void read_oracle(Reader r, OracleSection& o) {
  std::string mode = oracle_mode_name(o.mode);
  r.text("mode", mode);
  o.mode = oracle_from(mode, r.key_path("mode"));
  r.number("quantization", o.quantization);
  r.finish();
}

void read_query(Reader r, QuerySection& q) {
  r.numbers("x", q.x);
  r.numbers("mu_mean", q.mu_mean);
  r.number("mu_second_moment", q.mu_second_moment);
  r.finish();
}

void read_probe(Reader r, ProbeSection& p) {
  r.count("samples", p.samples);
  r.number("lo", p.lo);
  r.number("hi", p.hi);
  r.number("p", p.p);
  r.finish();
}

void read_observation(Reader r, ObservationSection& o) {
  r.number("dt", o.dt);
  r.count("reference_particle", o.reference_particle);
  r.finish();
}

std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

RunConfig parse_config(std::string_view text) {
  json root;
  try {
    root = json::parse(text.begin(), text.end(), nullptr, true, true);
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_column(text, e.byte == 0 ? 0 : e.byte - 1);
    std::ostringstream msg;
    msg << "line " << line << ", column " << col << ": malformed config";
    fail(ErrorCode::ParseError, msg.str());
  }

  RunConfig cfg;
  Reader r(root, "");
  if (!r.has("command")) fail(ErrorCode::ParseError, "key 'command': required");
  std::string command;
  r.text("command", command);
  cfg.command = command_from(command, "command");
  if (auto c = r.child("model")) read_model(*c, cfg.model);
  if (auto c = r.child("sde")) read_sde(*c, cfg.sde);
  if (auto c = r.child("frozen")) read_frozen(*c, cfg.frozen);
  if (auto c = r.child("filter")) read_filter(*c, cfg.filter);
  if (auto c = r.child("sweep")) read_sweep(*c, cfg.sweep);
  if (auto c = r.child("oracle")) read_oracle(*c, cfg.oracle);
  if (auto c = r.child("query")) read_query(*c, cfg.query);
  if (auto c = r.child("probe")) read_probe(*c, cfg.probe);
  if (auto c = r.child("observation")) read_observation(*c, cfg.observation);
  r.text("output_dir", cfg.output_dir);
  r.count("seed", cfg.seed);
  std::string format = format_name(cfg.format);
  r.text("format", format);
  cfg.format = format_from(format, "format");
  r.finish();

  cfg.sde.seed = cfg.seed;
  cfg.frozen.seed = cfg.seed;
  validate(cfg);
  return cfg;
}

std::string serialize_config(const RunConfig& cfg) {
  const auto& m = cfg.model;
  const auto& q = m.params;
  json j;
  j["command"] = command_name(cfg.command);
  j["model"] = {{"type", m.type}, {"n", m.n}, {"m", m.m}, {"l", m.l}, {"x0", m.x0}, {"z0", m.z0},
                {"params",
                 {{"a11", q.a11}, {"a12", q.a12}, {"a13", q.a13}, {"s1", q.s1},
                  {"gamma", q.gamma}, {"c1", q.c1}, {"c2", q.c2}, {"c3", q.c3}, {"s2", q.s2},
                  {"hscale", q.hscale}, {"sensor", sensor_name(q.sensor)}}}};
  const auto& s = cfg.sde;
  j["sde"] = {{"epsilon", s.epsilon}, {"T", s.T}, {"dt_macro", s.dt_macro},
              {"micro_substeps", s.micro_substeps}, {"N", s.N},
              {"delta_eps", optional_number(s.delta_eps)}};
  const auto& f = cfg.frozen;
  j["frozen"] = {{"M", f.M}, {"dt", f.dt}, {"burn_in", optional_number(f.burn_in)},
                 {"avg_window", f.avg_window}};
  const auto& fl = cfg.filter;
  j["filter"] = {{"Nf", fl.Nf}, {"resample_threshold", fl.resample_threshold},
                 {"functional", functional_name(fl.functional)}, {"p", fl.p}};
  j["sweep"] = {{"eps_grid", cfg.sweep.eps_grid}, {"mc_reps", cfg.sweep.mc_reps},
                {"p_orders", cfg.sweep.p_orders}};
  j["oracle"] = {{"mode", oracle_mode_name(cfg.oracle.mode)},
                 {"quantization", cfg.oracle.quantization}};
  j["query"] = {{"x", cfg.query.x}, {"mu_mean", cfg.query.mu_mean},
                {"mu_second_moment", optional_number(cfg.query.mu_second_moment)}};
  j["probe"] = {{"samples", cfg.probe.samples}, {"lo", cfg.probe.lo}, {"hi", cfg.probe.hi},
                {"p", cfg.probe.p}};
  j["observation"] = {{"dt", cfg.observation.dt},
                      {"reference_particle", cfg.observation.reference_particle}};
  j["output_dir"] = cfg.output_dir;
  j["seed"] = cfg.seed;
  j["format"] = format_name(cfg.format);
  return j.dump(2) + "\n";
}

ModelSpec build_model(const RunConfig& cfg) {
  const auto& m = cfg.model;
  if (m.type != "linear")
    fail(ErrorCode::ValidationError, "model.type must be 'linear', got '" + m.type + "'");
  Vec x0 = m.x0.empty() ? Vec(m.n, 0.5) : m.x0;
  Vec z0 = m.z0.empty() ? Vec(m.m, 0.0) : m.z0;
  if (x0.size() != m.n) fail(ErrorCode::ValidationError, "model.x0 must have n entries");
  if (z0.size() != m.m) fail(ErrorCode::ValidationError, "model.z0 must have m entries");
  try {
    return make_linear_model(m.params, m.n, m.m, m.l, std::move(x0), std::move(z0));
  } catch (const Error& e) {
    throw Error(ErrorCode::ValidationError, std::string("model: ") + e.what());
  }
}

SweepConfig build_sweep(const RunConfig& cfg) {
  SweepConfig s;
  s.eps_grid = cfg.sweep.eps_grid;
  s.mc_reps = cfg.sweep.mc_reps;
  s.p_orders = cfg.sweep.p_orders;
  s.sde = cfg.sde;
  s.filter = cfg.filter;
  s.frozen = cfg.frozen;
  return s;
}

void validate(const RunConfig& cfg) {
  const ModelSpec model = build_model(cfg);
  const bool sweep = cfg.command == Command::SweepAveraging || cfg.command == Command::SweepFilter;
  if (sweep) {
    validate(build_sweep(cfg));
    SdeConfig probe = cfg.sde;
    probe.epsilon = cfg.sweep.eps_grid.front();
    macro_steps(probe);
  } else {
    macro_steps(cfg.sde);
  }
  if (cfg.command == Command::Simulate || cfg.command == Command::Filter)
    resolve_substeps(model, cfg.sde);
  if (cfg.command == Command::Filter || cfg.command == Command::SweepFilter) validate(cfg.filter);
  if (cfg.oracle.mode == OracleMode::Estimated && !(cfg.oracle.quantization > 0.0))
    fail(ErrorCode::ValidationError, "oracle.quantization>0 violated");
  if (!cfg.query.x.empty() && cfg.query.x.size() != model.n)
    fail(ErrorCode::ValidationError, "query.x must have n entries");
  if (!cfg.query.mu_mean.empty() && cfg.query.mu_mean.size() != model.n)
    fail(ErrorCode::ValidationError, "query.mu_mean must have n entries");
  if (cfg.command == Command::Probe) {
    if (cfg.probe.samples < 2) fail(ErrorCode::ValidationError, "probe.samples>=2 violated");
    if (!(cfg.probe.lo < cfg.probe.hi)) fail(ErrorCode::ValidationError, "probe.lo<probe.hi violated");
    if (!(cfg.probe.p >= 1.0)) fail(ErrorCode::ValidationError, "probe.p>=1 violated");
  }
  if (cfg.observation.dt < 0.0) fail(ErrorCode::ValidationError, "observation.dt>=0 violated");
  if (cfg.command == Command::Filter && cfg.observation.reference_particle >= cfg.sde.N)
    fail(ErrorCode::ValidationError, "observation.reference_particle<N violated");
  if (cfg.output_dir.empty()) fail(ErrorCode::ValidationError, "output_dir must not be empty");
  if (cfg.sde.seed != cfg.seed || cfg.frozen.seed != cfg.seed)
    fail(ErrorCode::ValidationError, "section seeds must equal the master seed");
}

namespace {

using Clock = std::chrono::steady_clock;

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json table_json(const Table& t) {
  json rows = json::array();
  for (const auto& row : t.rows) {
    json r = json::array();
    for (double v : row) r.push_back(number_or_null(v));
    rows.push_back(std::move(r));
  }
  return {{"columns", t.columns}, {"rows", std::move(rows)}};
}

std::string table_csv(const Table& t, Command command) {
  std::ostringstream os;
  os << csv_schema_line(command_name(command));
  for (std::size_t c = 0; c < t.columns.size(); ++c) os << (c ? "," : "") << t.columns[c];
  os << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) os << (c ? "," : "") << fmt17(row[c]);
    os << '\n';
  }
  return os.str();
}

std::vector<std::string> indexed(const std::string& stem, std::size_t count) {
  std::vector<std::string> out;
  for (std::size_t k = 0; k < count; ++k) out.push_back(stem + std::to_string(k));
  return out;
}

// Accumulates command output and per-stage timings.
struct Runner {
  explicit Runner(const RunConfig& c) : cfg(c), dir(c.output_dir) {}

  const RunConfig& cfg;
  std::filesystem::path dir;
  std::string stage = "setup";
  std::vector<std::pair<std::string, double>> timings;
  Clock::time_point stage_start = Clock::now();
  std::vector<Table> tables;
  json extra = json::object();
  std::vector<std::string> files;

  void begin(std::string name) {
    end();
    stage = std::move(name);
    stage_start = Clock::now();
  }
  void end() {
    timings.emplace_back(stage, std::chrono::duration<double>(Clock::now() - stage_start).count());
  }
  bool csv() const { return cfg.format != OutputFormat::Json; }
  bool json_out() const { return cfg.format != OutputFormat::Csv; }

  void write(const std::string& name, std::string_view content) {
    write_file_atomic(dir / name, content);
    files.push_back(name);
  }
  void raw_csv(const std::string& name, const std::string& body) {
    if (csv()) write(name, csv_schema_line(command_name(cfg.command)) + body);
  }
};

MeasureSummary query_measure(const RunConfig& cfg, const Vec& x) {
  if (cfg.query.mu_mean.empty() && !cfg.query.mu_second_moment) return MeasureSummary::dirac(x);
  Vec mean = cfg.query.mu_mean.empty() ? x : cfg.query.mu_mean;
  double sq = 0.0;
  for (double v : mean) sq += v * v;
  return MeasureSummary::from_moments(std::move(mean), cfg.query.mu_second_moment.value_or(sq));
}

Table moments_table(const PathEnsemble& path, std::size_t n, std::size_t m) {
  Table t{"moments", {"time"}, {}};
  for (auto& c : indexed("x_mean", n)) t.columns.push_back(c);
  t.columns.push_back("x_second_moment");
  const bool fast = !path.fast.empty();
  if (fast) {
    for (auto& c : indexed("z_mean", m)) t.columns.push_back(c);
    t.columns.push_back("z_second_moment");
  }
  for (std::size_t k = 0; k < path.times.size(); ++k) {
    std::vector<double> row{path.times[k]};
    const auto s = summarize(path.slow[k]);
    row.insert(row.end(), s.mean.begin(), s.mean.end());
    row.push_back(s.second_moment);
    if (fast) {
      const auto f = summarize(path.fast[k]);
      row.insert(row.end(), f.mean.begin(), f.mean.end());
      row.push_back(f.second_moment);
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

Table trajectory_table(const std::string& name, const FilterTrajectory& tr) {
  Table t{name, {"time", "pi_F", "log_rho1", "ess"}, {}};
  for (std::size_t k = 0; k < tr.times.size(); ++k)
    t.rows.push_back({tr.times[k], tr.pi_F[k], tr.log_rho1[k], tr.ess[k]});
  return t;
}

void sweep_output(Runner& run, const SweepReport& report) {
  Table rows{"sweep", {"eps", "delta_eps", "p", "mean_error", "std_error", "reps"}, {}};
  Table env{"envelope",
            {"eps", "delta_eps", "segment_term", "freezing_term", "ergodic_term", "substeps"},
            {}};
  double last_eps = -1.0;
  for (const auto& r : report.rows) {
    rows.rows.push_back({r.eps, r.delta_eps, r.p, r.mean_error, r.std_error,
                         static_cast<double>(r.reps)});
    if (r.eps != last_eps) {
      env.rows.push_back({r.eps, r.delta_eps, r.envelope.segment, r.envelope.freezing,
                          r.envelope.ergodic, static_cast<double>(r.substeps)});
      last_eps = r.eps;
    }
  }
  run.tables.push_back(std::move(rows));
  run.tables.push_back(std::move(env));
  json fits = json::array();
  for (std::size_t i = 0; i < report.fits.size(); ++i)
    fits.push_back({{"p", report.fit_p[i]}, {"slope", report.fits[i].slope},
                    {"intercept", report.fits[i].intercept}, {"r2", report.fits[i].r2},
                    {"points", report.fits[i].points}});
  run.extra["fits"] = std::move(fits);
  run.extra["sweep_digest"] = report.config_digest;
  run.extra["runtime_seconds"] = report.runtime_seconds;
}

void execute(Runner& run) {
  const RunConfig& cfg = run.cfg;
  run.begin("model");
  const ModelSpec model = build_model(cfg);
  const std::size_t n = model.n, m = model.m;
  const Vec x = cfg.query.x.empty() ? model.x0 : cfg.query.x;

  auto make_oracle = [&] {
    run.begin("oracle");
    return make_drift_oracle(model, cfg.oracle.mode, cfg.frozen, cfg.oracle.quantization);
  };

  switch (cfg.command) {
    case Command::Simulate: {
      run.begin("simulate");
      PathEnsemble path = simulate_slow_fast(model, cfg.sde);
      if (cfg.sde.delta_eps) {
        run.begin("auxiliary");
        path = simulate_auxiliary(model, path, cfg.sde);
      }
      run.begin("write");
      if (run.csv()) {
        std::ostringstream os;
        write_path_csv(os, path);
        run.raw_csv("path.csv", os.str());
      }
      run.write("path.bin", encode_path_binary(path));
      run.tables.push_back(moments_table(path, n, m));
      run.extra["substeps"] = path.noise.substeps;
      break;
    }
    case Command::Frozen: {
      const MeasureSummary mu = query_measure(cfg, x);
      run.begin("frozen");
      const PathEnsemble path = simulate_frozen(model, x, mu, cfg.frozen);
      run.begin("invariant");
      const InvariantMoments inv = invariant_moments(model, x, mu, cfg.frozen);
      Table t{"frozen", {"time"}, {}};
      for (auto& c : indexed("z_mean", m)) t.columns.push_back(c);
      t.columns.push_back("z_second_moment");
      for (std::size_t k = 0; k < path.times.size(); ++k) {
        const auto s = summarize(path.fast[k]);
        std::vector<double> row{path.times[k]};
        row.insert(row.end(), s.mean.begin(), s.mean.end());
        row.push_back(s.second_moment);
        t.rows.push_back(std::move(row));
      }
      Table it{"invariant", indexed("mean", m), {}};
      it.columns.push_back("second_moment");
      for (auto& c : indexed("mean_se", m)) it.columns.push_back(c);
      it.columns.push_back("second_moment_se");
      std::vector<double> row = inv.mean;
      row.push_back(inv.second_moment);
      row.insert(row.end(), inv.mean_std_error.begin(), inv.mean_std_error.end());
      row.push_back(inv.second_moment_std_error);
      it.rows.push_back(std::move(row));
      run.tables.push_back(std::move(t));
      run.tables.push_back(std::move(it));
      break;
    }
    case Command::Bbar: {
      const MeasureSummary mu = query_measure(cfg, x);
      run.begin("bbar");
      const BbarEstimate est = estimate_bbar(model, x, mu, cfg.frozen);
      const Vec exact = analytic_bbar_linear(cfg.model.params, x, mu.mean);
      Table t{"bbar", {"coordinate", "drift", "std_error", "analytic"}, {}};
      for (std::size_t k = 0; k < n; ++k)
        t.rows.push_back({static_cast<double>(k), est.drift[k], est.std_error[k], exact[k]});
      run.tables.push_back(std::move(t));
      run.extra["burn_in"] = cfg.frozen.burn_in.value_or(default_burn_in(model));
      break;
    }
    case Command::Filter: {
      const AveragedDriftOracle oracle = make_oracle();
      run.begin("signal");
      const auto [full, avg] = coupled_pair(model, oracle, cfg.sde);
      run.begin("observations");
      const double obs_dt = cfg.observation.dt > 0.0 ? cfg.observation.dt : cfg.sde.dt_macro;
      const ObservationPath obs = generate_observations(
          model, full, cfg.observation.reference_particle, obs_dt, cfg.seed);
      run.begin("filter-multiscale");
      const FilterTrajectory a =
          run_filter(SignalKind::Multiscale, model, nullptr, obs, cfg.filter, cfg.sde);
      run.begin("filter-averaged");
      const FilterTrajectory b = run_filter(SignalKind::Averaged, model, &oracle, obs, cfg.filter,
                                            cfg.sde, law_trace(avg));
      run.begin("discrepancy");
      const FilterDiscrepancy d = filter_discrepancy(a, b, cfg.filter.p);
      Table ot{"observations", {"time"}, {}};
      for (auto& c : indexed("dY", model.l)) ot.columns.push_back(c);
      for (std::size_t k = 0; k < obs.increments.size(); ++k) {
        std::vector<double> row{obs.times[k + 1]};
        row.insert(row.end(), obs.increments[k].begin(), obs.increments[k].end());
        ot.rows.push_back(std::move(row));
      }
      Table dt{"discrepancy", {"time", "abs_diff_pow_p"}, {}};
      for (std::size_t k = 0; k < a.times.size(); ++k) dt.rows.push_back({a.times[k], d.per_time[k]});
      run.tables.push_back(std::move(ot));
      run.tables.push_back(trajectory_table("filter_multiscale", a));
      run.tables.push_back(trajectory_table("filter_averaged", b));
      run.tables.push_back(std::move(dt));
      run.extra["discrepancy_average"] = d.average;
      run.extra["discrepancy_terminal"] = d.terminal;
      run.extra["resample_events"] = {{"multiscale", a.resample_events.size()},
                                      {"averaged", b.resample_events.size()}};
      break;
    }
    case Command::SweepAveraging: {
      const AveragedDriftOracle oracle = make_oracle();
      run.begin("sweep");
      sweep_output(run, averaging_error_sweep(model, oracle, build_sweep(cfg)));
      break;
    }
    case Command::SweepFilter: {
      const AveragedDriftOracle oracle = make_oracle();
      run.begin("sweep");
      sweep_output(run, filter_error_sweep(model, oracle, build_sweep(cfg)));
      break;
    }
    case Command::Probe: {
      run.begin("probe");
      const auto rep = probe_assumptions(model, cfg.probe.samples,
                                         ProbeBox{cfg.probe.lo, cfg.probe.hi}, cfg.probe.p,
                                         cfg.seed);
      Table t{"probe",
              {"lipschitz_b1s1", "lipschitz_b2s2", "lipschitz_h", "beta1", "beta2", "p",
               "margin", "h_bound", "fast_stiffness", "sample_count"},
              {{rep.lipschitz_b1s1, rep.lipschitz_b2s2, rep.lipschitz_h, rep.beta1, rep.beta2,
                rep.p, rep.margin, rep.h_bound, rep.fast_stiffness,
                static_cast<double>(rep.sample_count)}}};
      json report = json::object();
      for (std::size_t c = 0; c < t.columns.size(); ++c)
        report[t.columns[c]] = number_or_null(t.rows[0][c]);
      report["sample_count"] = rep.sample_count;
      report["domain_box"] = {cfg.probe.lo, cfg.probe.hi};
      run.write("probe.json", report.dump(2) + "\n");
      run.tables.push_back(std::move(t));
      break;
    }
  }

  run.begin("write");
  if (run.csv())
    for (const auto& t : run.tables) run.write(t.name + ".csv", table_csv(t, cfg.command));
  if (run.json_out()) {
    json result = {{"command", command_name(cfg.command)}, {"schema_version", kSchemaVersion}};
    for (const auto& t : run.tables) result["tables"][t.name] = table_json(t);
    result["summary"] = run.extra;
    run.write("result.json", result.dump(2) + "\n");
  }
}

json error_json(const Error& e, const std::string& stage) {
  return {{"error", {{"code", error_code_name(e.code())}, {"message", e.what()}, {"stage", stage}}}};
}

}  // namespace

RunResult run_command(const RunConfig& cfg) {
  const auto start = Clock::now();
  const auto wall = std::chrono::system_clock::now();
  Runner run(cfg);
  RunResult result;
  try {
    run.stage = "validate";
    validate(cfg);
    execute(run);
    run.end();
  } catch (const Error& e) {
    result.exit_code = 1;
    result.error = e.code();
    result.summary_json = error_json(e, run.stage).dump(2) + "\n";
  } catch (const std::exception& e) {
    result.exit_code = 1;
    result.summary_json =
        json{{"error", {{"code", "Internal"}, {"message", e.what()}, {"stage", run.stage}}}}.dump(2) +
        "\n";
  }
  if (result.exit_code != 0) {
    try {
      run.write("error.json", result.summary_json);
    } catch (const Error&) {
    }
    result.files = run.files;
    return result;
  }

  json stages = json::array();
  for (const auto& [name, secs] : run.timings) stages.push_back({{"stage", name}, {"seconds", secs}});
  const std::string labels[] = {"signal/B", "signal/W", "frozen/W", "obs/V",
                                "filter/B", "filter/W", "filter/resample"};
  json seeds = {{"master", cfg.seed}};
  for (const auto& label : labels) seeds["streams"][label] = derive_key(cfg.seed, label);
  json manifest = {
      {"tool", kToolName},
      {"version", kToolVersion},
      {"schema_version", kSchemaVersion},
      {"command", command_name(cfg.command)},
      {"config_digest", content_digest(serialize_config(cfg))},
      {"started_unix_seconds",
       std::chrono::duration<double>(wall.time_since_epoch()).count()},
      {"wall_clock_seconds", std::chrono::duration<double>(Clock::now() - start).count()},
      {"stages", std::move(stages)},
      {"seeds", std::move(seeds)},
      {"files", run.files},
      {"summary", run.extra},
  };
  result.summary_json = manifest.dump(2) + "\n";
  try {
    run.write("manifest.json", result.summary_json);
  } catch (const Error& e) {
    result.exit_code = 1;
    result.error = e.code();
    result.summary_json = error_json(e, "manifest").dump(2) + "\n";
  }
  result.files = run.files;
  return result;
}

}  // namespace mvx
