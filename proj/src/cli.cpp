#include "rpo/cli.hpp"

#include "rpo/qp_reg.hpp"
#include "rpo/risk.hpp"

#include <json.hpp>

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>

namespace rpo {
namespace {

using Eigen::Index;
using Eigen::VectorXd;
using Json = nlohmann::ordered_json;

std::string location(long line, long column = 0) {
  std::string s = "line " + std::to_string(line);
  if (column > 0) s += ", column " + std::to_string(column);
  return s;
}

// Splits one CSV record; double quotes protect commas and "" is a quote.
std::vector<std::string> split_record(const std::string& line, long line_no) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        fields.back() += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.emplace_back();
    } else {
      fields.back() += ch;
    }
  }
  if (quoted) {
    throw Error(ErrorCode::kRaggedRow, location(line_no) + ": unterminated quote");
  }
  return fields;
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t");
  return s.substr(begin, end - begin + 1);
}

double parse_number(const std::string& field, long line, long column) {
  const std::string s = trim(field);
  double value = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (s.empty() || ec != std::errc() || ptr != last) {
    throw Error(ErrorCode::kUnparsableNumber,
                location(line, column) + ": cannot parse \"" + field + "\" as a number");
  }
  return value;
}

// Hand-rolled only for the number format; strings go through the JSON
// library's escaping.
void emit(const Json& j, std::string& out, int depth) {
  const std::string pad(static_cast<std::size_t>(2 * (depth + 1)), ' ');
  const std::string close_pad(static_cast<std::size_t>(2 * depth), ' ');
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (const auto& [key, value] : j.items()) {
        if (!first) out += ",\n";
        first = false;
        out += pad + Json(key).dump() + ": ";
        emit(value, out, depth + 1);
      }
      out += "\n" + close_pad + "}";
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      // Arrays of scalars stay on one line.
      bool scalar = true;
      for (const auto& v : j) scalar = scalar && !v.is_structured();
      out += scalar ? "[" : "[\n";
      bool first = true;
      for (const auto& v : j) {
        if (!first) out += scalar ? ", " : ",\n";
        first = false;
        if (!scalar) out += pad;
        emit(v, out, depth + 1);
      }
      out += scalar ? "]" : "\n" + close_pad + "]";
      return;
    }
    case Json::value_t::number_float: {
      const double x = j.get<double>();
      if (!std::isfinite(x)) {
        out += "null";
        return;
      }
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.17g", x);
      out += buf;
      return;
    }
    default:
      out += j.dump();
  }
}

std::string render(const Json& j) {
  std::string out;
  emit(j, out, 0);
  out += "\n";
  return out;
}

Json optional_number(const std::optional<double>& x) {
  return x ? Json(*x) : Json(nullptr);
}

Json number_array(const VectorXd& v) {
  Json a = Json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Json number_array(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(x);
  return a;
}

ReturnsMatrix synthetic_input(const std::string& spec, std::uint64_t seed) {
  // synthetic:iid:n=<N>,t=<T>
  const std::string prefix = "synthetic:iid:";
  const std::string body = spec.substr(prefix.size());
  int n = 0, t = 0;
  std::stringstream ss(body);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    const std::string key = item.substr(0, eq);
    int value = 0;
    const std::string text = eq == std::string::npos ? "" : item.substr(eq + 1);
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (eq == std::string::npos || ec != std::errc() || ptr != text.data() + text.size() ||
        (key != "n" && key != "t")) {
      throw Error(ErrorCode::kInvalidConfig, "bad synthetic input item \"" + item + "\"");
    }
    (key == "n" ? n : t) = value;
  }
  if (n < 1 || t < 1) {
    throw Error(ErrorCode::kInvalidConfig, "synthetic input needs n >= 1 and t >= 1");
  }
  GeneratorSpec g;
  g.n = n;
  g.t = t;
  g.seed = seed;
  return generate(g);
}

ReturnsMatrix load_input(const RunConfig& config) {
  if (config.input.rfind("synthetic:", 0) == 0) return synthetic_input(config.input, config.seed);
  return parse_returns_csv(config.input);
}

bool needs_input(Command c) {
  return c == Command::kOptimize || c == Command::kEsLp || c == Command::kMinVar ||
         c == Command::kCrossVal;
}

using Clock = std::chrono::steady_clock;

std::optional<double> elapsed_ms(const RunConfig& config, Clock::time_point start) {
  if (!config.timing) return std::nullopt;
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

void deliver(const RunConfig& config, const std::string& json, std::ostream& out) {
  if (config.output.empty()) {
    out << json;
  } else {
    write_text(config.output, json);
    out << "report written to " << config.output << "\n";
  }
}

void print_weights(std::ostream& out, const std::vector<std::string>& names,
                   const VectorXd& w) {
  for (Index i = 0; i < w.size(); ++i) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "  %-12s % .6f\n",
                  names[static_cast<std::size_t>(i)].c_str(), w[i]);
    out << buf;
  }
}

int run_optimize(const RunConfig& config, std::ostream& out) {
  const auto start = Clock::now();
  const ReturnsMatrix r = load_input(config);
  const TailConfig tail(config.nu);
  const RegConfig reg(config.c, config.mode);
  const SolveReport rep = config.solver == SolverChoice::kDual
                              ? solve_dual(r, tail, reg, config.tol)
                              : solve_primal(r, tail, reg, config.tol);
  SolveJson j;
  j.status = std::string(to_string(rep.status));
  j.names = r.asset_names();
  j.weights = rep.primal->weights.values();
  j.objective = rep.primal->objective;
  j.epsilon = rep.primal->epsilon;
  j.duality_gap = rep.duality_gap;
  j.kkt_residual = rep.kkt_residual;
  j.n_eff = rep.n_eff;
  j.nu = config.nu;
  j.c = config.c;
  j.seed = config.seed;
  j.wall_time_ms = elapsed_ms(config, start);

  out << "regularized " << to_string(config.mode) << " portfolio, status "
      << j.status << ", objective " << rep.primal->objective << ", N_eff "
      << rep.n_eff << "\n";
  print_weights(out, j.names, *j.weights);
  deliver(config, solve_json(j), out);
  return rep.status == SolveStatus::kOptimal ? 0 : 1;
}

int run_es_lp(const RunConfig& config, std::ostream& out) {
  const auto start = Clock::now();
  const ReturnsMatrix r = load_input(config);
  const TailConfig tail(config.nu);
  const LPStanding lp = minimize_es_lp(r, tail, config.tol);
  SolveJson j;
  j.status = std::string(to_string(lp.status));
  j.names = r.asset_names();
  j.nu = config.nu;
  j.seed = config.seed;
  if (lp.status == SolveStatus::kUnbounded) {
    j.certificate = lp.certificate->direction;
    j.wall_time_ms = elapsed_ms(config, start);
    out << "expected shortfall is unbounded below (apparent arbitrage); "
           "certificate direction:\n";
    print_weights(out, j.names, *j.certificate);
    deliver(config, solve_json(j), out);
    return 2;
  }
  j.weights = lp.solution->weights.values();
  j.objective = lp.solution->objective;
  j.epsilon = lp.solution->epsilon;
  j.n_eff = effective_assets(lp.solution->weights);
  j.wall_time_ms = elapsed_ms(config, start);
  out << "minimum expected shortfall " << lp.solution->objective << "\n";
  print_weights(out, j.names, *j.weights);
  deliver(config, solve_json(j), out);
  return 0;
}

int run_minvar(const RunConfig& config, std::ostream& out) {
  const auto start = Clock::now();
  const ReturnsMatrix r = load_input(config);
  const PortfolioWeights w = min_variance(r);
  SolveJson j;
  j.status = "optimal";
  j.names = r.asset_names();
  j.weights = w.values();
  j.objective = sample_variance_risk(r, w);
  j.n_eff = effective_assets(w);
  j.seed = config.seed;
  j.wall_time_ms = elapsed_ms(config, start);
  out << "minimum variance portfolio, sample variance " << *j.objective << "\n";
  print_weights(out, j.names, w.values());
  deliver(config, solve_json(j), out);
  return 0;
}

int run_sweep(const RunConfig& config, std::ostream& out) {
  const auto start = Clock::now();
  const SweepResult s = q0_sweep(config.n, config.t, config.trials, config.seed,
                                 config.threads);
  for (std::size_t i = 0; i < s.grid.size(); ++i) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "  N=%d T=%d  q0 = %.4f +- %.4f\n", s.grid[i].n,
                  s.grid[i].t, s.q0_mean[i], s.q0_stderr[i]);
    out << buf;
  }
  deliver(config, sweep_json(s, elapsed_ms(config, start)), out);
  return 0;
}

StabilityConfig stability_config(const RunConfig& config) {
  StabilityConfig sc;
  sc.n = config.n;
  sc.t = config.t.front();
  sc.nu = config.nu;
  sc.c_grid = config.c_grid;
  sc.folds = config.folds;
  sc.test_t = config.test_t;
  sc.trials = config.trials;
  sc.seed = config.seed;
  sc.mode = config.mode;
  sc.threads = config.threads;
  return sc;
}

int run_stability(const RunConfig& config, std::ostream& out) {
  const auto start = Clock::now();
  const StabilityConfig sc = stability_config(config);
  const StabilitySummary s = stability_study(sc);
  out << "unbounded LP fraction " << s.unbounded_fraction << "\n"
      << "out-of-sample ES: LP " << s.lp_oos_es_mean << ", regularized "
      << s.reg_oos_es_mean << "\n"
      << "mean pairwise angle: LP " << s.lp_angle_dispersion << ", regularized "
      << s.reg_angle_dispersion << "\n";
  deliver(config, stability_json(sc, s, elapsed_ms(config, start)), out);
  return 0;
}

int run_crossval(const RunConfig& config, std::ostream& out) {
  const auto start = Clock::now();
  const ReturnsMatrix r = load_input(config);
  const CVResult cv = cross_validate_c(r, TailConfig(config.nu), config.c_grid,
                                       config.folds, config.seed, config.mode);
  out << "best C " << cv.best_c << "\n";
  deliver(config, cv_json(cv, config.nu, elapsed_ms(config, start)), out);
  return 0;
}

}  // namespace

ReturnsMatrix parse_returns_csv_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  long line_no = 0;
  std::vector<std::string> names;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (trim(line).empty()) continue;
    std::vector<std::string> fields = split_record(line, line_no);
    if (names.empty()) {
      for (auto& f : fields) names.push_back(trim(f));
      continue;
    }
    if (fields.size() != names.size()) {
      throw Error(ErrorCode::kRaggedRow,
                  location(line_no) + ": expected " + std::to_string(names.size()) +
                      " fields, found " + std::to_string(fields.size()));
    }
    std::vector<double> row;
    for (std::size_t i = 0; i < fields.size(); ++i) {
      row.push_back(parse_number(fields[i], line_no, static_cast<long>(i + 1)));
    }
    rows.push_back(std::move(row));
  }
  if (names.empty()) throw Error(ErrorCode::kEmptyFile, "no header row");
  if (rows.empty()) throw Error(ErrorCode::kEmptyFile, "no data rows after the header");

  Eigen::MatrixXd values(static_cast<Index>(rows.size()), static_cast<Index>(names.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    for (std::size_t i = 0; i < names.size(); ++i) {
      values(static_cast<Index>(k), static_cast<Index>(i)) = rows[k][i];
    }
  }
  return ReturnsMatrix(std::move(values), std::move(names));
}

ReturnsMatrix parse_returns_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::kIoError, "cannot read " + path);
  try {
    return parse_returns_csv_text(buffer.str());
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

std::string_view to_string(Command command) {
  switch (command) {
    case Command::kOptimize: return "optimize";
    case Command::kEsLp: return "es-lp";
    case Command::kMinVar: return "minvar";
    case Command::kSweep: return "sweep";
    case Command::kStability: return "stability";
    case Command::kCrossVal: return "crossval";
  }
  return "unknown";
}

Tolerances default_tolerances() {
  Tolerances tol;
  if (const char* env = std::getenv("RPO_TOL")) {
    const std::string s(env);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size() || !(value > 0.0) ||
        !std::isfinite(value)) {
      throw Error(ErrorCode::kInvalidConfig, "RPO_TOL must be a positive number, got \"" + s + "\"");
    }
    tol.relative = value;
  }
  return tol;
}

void validate(const RunConfig& config) {
  std::vector<std::string> problems;
  auto require = [&](bool ok, const std::string& what) {
    if (!ok) problems.push_back(what);
  };
  const Command cmd = config.command;
  if (needs_input(cmd)) require(!config.input.empty(), "--input is required");
  if (cmd != Command::kMinVar && cmd != Command::kSweep) {
    require(config.nu > 0.0 && config.nu <= 1.0, "--nu must lie in (0, 1]");
  }
  if (cmd == Command::kOptimize) {
    require(config.c > 0.0 && std::isfinite(config.c), "--c must be positive");
  }
  require(config.tol.relative > 0.0 && std::isfinite(config.tol.relative),
          "--tol must be positive");
  if (cmd == Command::kSweep || cmd == Command::kStability) {
    require(config.n >= 1, "--n must be at least 1");
    require(config.trials >= 1, "--trials must be at least 1");
    require(!config.t.empty(), "--t needs at least one value");
  }
  if (cmd == Command::kSweep) {
    for (int t : config.t) {
      require(t > config.n, "--t value " + std::to_string(t) + " must exceed --n");
    }
  }
  if (cmd == Command::kStability) {
    require(config.t.size() == 1, "stability takes a single --t");
    if (!config.t.empty() && config.nu > 0.0) {
      require(config.nu * config.t.front() >= 1.0 - 1e-12, "--nu times --t must be at least 1");
    }
    require(config.test_t >= 1, "--test-t must be at least 1");
  }
  if (cmd == Command::kStability || cmd == Command::kCrossVal) {
    require(!config.c_grid.empty(), "--c-grid needs at least one value");
    for (double c : config.c_grid) {
      require(c > 0.0 && std::isfinite(c), "--c-grid values must be positive");
    }
    require(config.folds >= 2, "--folds must be at least 2");
  }
  if (!problems.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw Error(ErrorCode::kInvalidConfig, msg);
  }
}

std::string solve_json(const SolveJson& r) {
  Json j;
  j["status"] = r.status;
  if (r.certificate) j["certificate"] = number_array(*r.certificate);
  if (r.weights) {
    Json w = Json::object();
    for (Index i = 0; i < r.weights->size(); ++i) {
      w[r.names[static_cast<std::size_t>(i)]] = (*r.weights)[i];
    }
    j["weights"] = w;
  } else {
    j["weights"] = nullptr;
  }
  j["objective"] = optional_number(r.objective);
  j["epsilon"] = optional_number(r.epsilon);
  j["duality_gap"] = optional_number(r.duality_gap);
  j["kkt_residual"] = optional_number(r.kkt_residual);
  j["n_eff"] = optional_number(r.n_eff);
  j["nu"] = optional_number(r.nu);
  j["c"] = optional_number(r.c);
  j["seed"] = r.seed;
  j["wall_time_ms"] = optional_number(r.wall_time_ms);
  return render(j);
}

std::string sweep_json(const SweepResult& s, std::optional<double> wall_time_ms) {
  Json j;
  j["status"] = "complete";
  Json n = Json::array(), t = Json::array(), trials = Json::array(),
       resamples = Json::array();
  for (std::size_t i = 0; i < s.grid.size(); ++i) {
    n.push_back(s.grid[i].n);
    t.push_back(s.grid[i].t);
    trials.push_back(s.trials[i]);
    resamples.push_back(s.resamples[i]);
  }
  j["n"] = n;
  j["t"] = t;
  j["q0_mean"] = number_array(s.q0_mean);
  j["q0_stderr"] = number_array(s.q0_stderr);
  j["trials"] = trials;
  j["resamples"] = resamples;
  j["seed"] = s.seed;
  j["wall_time_ms"] = optional_number(wall_time_ms);
  return render(j);
}

std::string cv_json(const CVResult& cv, double nu, std::optional<double> wall_time_ms) {
  Json j;
  j["status"] = "complete";
  j["c_grid"] = number_array(cv.c_grid);
  const VectorXd mean = cv.fold_scores.rowwise().mean();
  j["mean_scores"] = number_array(mean);
  Json folds = Json::array();
  for (Index g = 0; g < cv.fold_scores.rows(); ++g) {
    folds.push_back(number_array(VectorXd(cv.fold_scores.row(g).transpose())));
  }
  j["fold_scores"] = folds;
  j["best_c"] = cv.best_c;
  j["folds"] = cv.fold_scores.cols();
  j["nu"] = nu;
  j["seed"] = cv.seed;
  j["wall_time_ms"] = optional_number(wall_time_ms);
  return render(j);
}

std::string stability_json(const StabilityConfig& c, const StabilitySummary& s,
                           std::optional<double> wall_time_ms) {
  Json j;
  j["status"] = "complete";
  j["n"] = c.n;
  j["t"] = c.t;
  j["nu"] = c.nu;
  j["mode"] = std::string(to_string(c.mode));
  j["c_grid"] = number_array(c.c_grid);
  j["folds"] = c.folds;
  j["test_t"] = c.test_t;
  j["trials"] = s.trials;
  j["lp_optimal"] = s.lp_optimal;
  j["unbounded_fraction"] = s.unbounded_fraction;
  j["lp_oos_es_mean"] = s.lp_oos_es_mean;
  j["lp_oos_es_stderr"] = s.lp_oos_es_stderr;
  j["reg_oos_es_mean"] = s.reg_oos_es_mean;
  j["reg_oos_es_stderr"] = s.reg_oos_es_stderr;
  j["reg_oos_es_mean_paired"] = s.reg_oos_es_mean_paired;
  j["lp_angle_dispersion"] = s.lp_angle_dispersion;
  j["reg_angle_dispersion"] = s.reg_angle_dispersion;
  j["reg_angle_dispersion_paired"] = s.reg_angle_dispersion_paired;
  j["chosen_c"] = number_array(s.chosen_c);
  j["seed"] = s.seed;
  j["wall_time_ms"] = optional_number(wall_time_ms);
  return render(j);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open " + path + " for writing");
  out << text;
  out.flush();
  if (!out) throw Error(ErrorCode::kIoError, "failed writing " + path);
}

int run(const RunConfig& config, std::ostream& out, std::ostream& err) {
  try {
    validate(config);
    switch (config.command) {
      case Command::kOptimize: return run_optimize(config, out);
      case Command::kEsLp: return run_es_lp(config, out);
      case Command::kMinVar: return run_minvar(config, out);
      case Command::kSweep: return run_sweep(config, out);
      case Command::kStability: return run_stability(config, out);
      case Command::kCrossVal: return run_crossval(config, out);
    }
  } catch (const Error& e) {
    err << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
  }
  return 1;
}

}  // namespace rpo
