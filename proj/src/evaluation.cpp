#include "sqrtba/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

namespace sqrtba {

double cost_threshold(double f0, double f_star, double tau) {
  return f_star + tau * (f0 - f_star);
}

double time_to_threshold(const ConvergenceTrace& trace, double f_tau) {
  double running = std::numeric_limits<double>::infinity();
  for (const auto& r : trace.records) {
    running = std::min(running, r.cost);
    if (running <= f_tau) return r.time_s;
  }
  return std::numeric_limits<double>::infinity();
}

std::vector<double> log_spaced_alphas(std::size_t n, double alpha_max) {
  std::vector<double> a(n);
  if (n == 1) {
    a[0] = 1.0;
    return a;
  }
  const double lmax = std::log(alpha_max);
  for (std::size_t i = 0; i < n; ++i)
    a[i] = std::exp(lmax * double(i) / double(n - 1));
  a.front() = 1.0;
  a.back() = alpha_max;
  return a;
}

PerformanceProfile performance_profile(
    const std::vector<ConvergenceTrace>& traces, double tau,
    const std::vector<double>& alphas) {
  PerformanceProfile prof;
  prof.tau = tau;
  prof.alphas = alphas;

  std::set<std::string> problems;
  std::set<std::string> solvers;
  std::map<std::pair<std::string, std::string>, const ConvergenceTrace*> cell;
  for (const auto& t : traces) {
    if (t.records.empty())
      throw Error("empty trace for " + t.problem_id + " / " + t.solver_id);
    problems.insert(t.problem_id);
    solvers.insert(t.solver_id);
    if (!cell.emplace(std::make_pair(t.problem_id, t.solver_id), &t).second)
      throw Error("duplicate trace for " + t.problem_id + " / " + t.solver_id);
  }
  std::string missing;
  for (const auto& p : problems)
    for (const auto& s : solvers)
      if (!cell.count({p, s})) missing += "\n  " + p + " / " + s;
  if (!missing.empty()) throw Error("missing traces:" + missing);

  prof.problems.assign(problems.begin(), problems.end());
  prof.solvers.assign(solvers.begin(), solvers.end());
  const std::size_t ns = prof.solvers.size();
  prof.rho.assign(ns, std::vector<double>(alphas.size(), 0.0));
  if (prof.problems.empty()) return prof;

  // t[p][s]
  std::vector<std::vector<double>> t(prof.problems.size(),
                                     std::vector<double>(ns));
  for (std::size_t p = 0; p < prof.problems.size(); ++p) {
    double f_star = std::numeric_limits<double>::infinity();
    double f0 = -std::numeric_limits<double>::infinity();
    for (const auto& s : prof.solvers) {
      const ConvergenceTrace& tr = *cell.at({prof.problems[p], s});
      f0 = std::max(f0, tr.records.front().cost);
      for (const auto& r : tr.records) f_star = std::min(f_star, r.cost);
    }
    const double f_tau = cost_threshold(f0, f_star, tau);
    for (std::size_t s = 0; s < ns; ++s)
      t[p][s] =
          time_to_threshold(*cell.at({prof.problems[p], prof.solvers[s]}), f_tau);
  }

  const double np = double(prof.problems.size());
  for (std::size_t p = 0; p < prof.problems.size(); ++p) {
    const double tmin = *std::min_element(t[p].begin(), t[p].end());
    if (!std::isfinite(tmin)) continue;
    for (std::size_t s = 0; s < ns; ++s) {
      if (!std::isfinite(t[p][s])) continue;
      for (std::size_t a = 0; a < alphas.size(); ++a)
        if (t[p][s] <= alphas[a] * tmin) prof.rho[s][a] += 1.0;
    }
  }
  for (auto& curve : prof.rho)
    for (double& v : curve) v = 100.0 * v / np;
  return prof;
}

ProblemSummary summarize(const BaProblem& problem, std::string problem_id) {
  ProblemSummary s;
  s.problem_id = std::move(problem_id);
  s.num_cameras = problem.num_cameras();
  s.num_landmarks = problem.num_landmarks();
  s.num_observations = problem.num_observations();
  if (s.num_cameras > 0)
    s.obs_per_camera = double(s.num_observations) / double(s.num_cameras);
  if (s.num_landmarks == 0) return s;
  s.obs_per_landmark_mean =
      double(s.num_observations) / double(s.num_landmarks);
  double var = 0.0;
  for (std::size_t j = 0; j < s.num_landmarks; ++j) {
    const std::size_t k = problem.landmark_observations(j).size();
    s.obs_per_landmark_max = std::max(s.obs_per_landmark_max, k);
    const double d = double(k) - s.obs_per_landmark_mean;
    var += d * d;
  }
  s.obs_per_landmark_std = std::sqrt(var / double(s.num_landmarks));
  return s;
}

std::size_t landmark_block_bytes(const BaProblem& problem,
                                 std::size_t scalar_size) {
  std::size_t total = 0;
  for (std::size_t j = 0; j < problem.num_landmarks(); ++j) {
    const std::size_t k = problem.landmark_observations(j).size();
    if (k > 0) total += (2 * k + 3) * (9 * k + 4);
  }
  return total * scalar_size;
}

// --- CSV ---------------------------------------------------------------------

namespace {

constexpr const char* kTraceHeader =
    "problem_id,solver_id,precision,iteration,time_s,cost,trial_cost,lambda,"
    "cg_iterations,accepted,indefinite,peak_memory_bytes,termination";

std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double to_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str()) throw Error("not a number in CSV: '" + s + "'");
  return v;
}

std::ostream& full_precision(std::ostream& out) {
  return out << std::setprecision(std::numeric_limits<double>::max_digits10);
}

}  // namespace

void write_trace_csv(std::ostream& out, const ConvergenceTrace& trace) {
  full_precision(out);
  out << kTraceHeader << '\n';
  for (const auto& r : trace.records) {
    out << trace.problem_id << ',' << trace.solver_id << ',' << trace.precision
        << ',' << r.iteration << ',' << r.time_s << ',' << r.cost << ','
        << r.trial_cost << ',' << r.lambda << ',' << r.cg_iterations << ','
        << int(r.accepted) << ',' << int(r.indefinite) << ','
        << r.peak_memory_bytes << ',' << trace.termination << '\n';
  }
}

std::vector<ConvergenceTrace> read_trace_csv(std::istream& in) {
  std::vector<ConvergenceTrace> traces;
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader)
    throw Error("trace CSV: unexpected header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 13) throw Error("trace CSV: expected 13 fields: " + line);
    if (traces.empty() || traces.back().problem_id != f[0] ||
        traces.back().solver_id != f[1]) {
      traces.emplace_back();
      traces.back().problem_id = f[0];
      traces.back().solver_id = f[1];
      traces.back().precision = f[2];
    }
    TraceRecord r;
    r.iteration = std::stoi(f[3]);
    r.time_s = to_double(f[4]);
    r.cost = to_double(f[5]);
    r.trial_cost = to_double(f[6]);
    r.lambda = to_double(f[7]);
    r.cg_iterations = std::stoi(f[8]);
    r.accepted = f[9] == "1";
    r.indefinite = f[10] == "1";
    r.peak_memory_bytes = std::stoull(f[11]);
    traces.back().termination = f[12];
    traces.back().records.push_back(r);
  }
  return traces;
}

void write_profile_csv(std::ostream& out, const PerformanceProfile& p) {
  full_precision(out);
  out << "tau,alpha";
  for (const auto& s : p.solvers) out << ',' << s;
  out << '\n';
  for (std::size_t a = 0; a < p.alphas.size(); ++a) {
    out << p.tau << ',' << p.alphas[a];
    for (std::size_t s = 0; s < p.solvers.size(); ++s) out << ',' << p.rho[s][a];
    out << '\n';
  }
}

PerformanceProfile read_profile_csv(std::istream& in) {
  PerformanceProfile p;
  std::string line;
  if (!std::getline(in, line)) throw Error("profile CSV: missing header");
  const auto head = split(line);
  if (head.size() < 2 || head[0] != "tau" || head[1] != "alpha")
    throw Error("profile CSV: unexpected header");
  p.solvers.assign(head.begin() + 2, head.end());
  p.rho.assign(p.solvers.size(), {});
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != head.size()) throw Error("profile CSV: bad row: " + line);
    p.tau = to_double(f[0]);
    p.alphas.push_back(to_double(f[1]));
    for (std::size_t s = 0; s < p.solvers.size(); ++s)
      p.rho[s].push_back(to_double(f[2 + s]));
  }
  return p;
}

void write_profile_svg(std::ostream& out, const PerformanceProfile& p) {
  const double w = 640, h = 400, ml = 60, mr = 170, mt = 30, mb = 50;
  const double pw = w - ml - mr, ph = h - mt - mb;
  const double amax = p.alphas.empty() ? 1.0 : p.alphas.back();
  const double lmax = std::log(std::max(amax, 1.0 + 1e-12));
  auto X = [&](double a) { return ml + pw * std::log(a) / lmax; };
  auto Y = [&](double r) { return mt + ph * (1.0 - r / 100.0); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                 "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"};

  out << std::setprecision(6);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w
      << "\" height=\"" << h << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << ml << "\" y=\"18\">performance profile, tau = "
      << p.tau << "</text>\n";
  out << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw
      << "\" height=\"" << ph << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int r = 0; r <= 100; r += 20)
    out << "<text x=\"" << ml - 30 << "\" y=\"" << Y(r) + 4 << "\">" << r
        << "</text>\n";
  for (double a = 1; a <= amax * (1 + 1e-9); a *= 2)
    out << "<text x=\"" << X(a) - 6 << "\" y=\"" << mt + ph + 18 << "\">" << a
        << "</text>\n";
  out << "<text x=\"" << ml + pw / 2 << "\" y=\"" << h - 10
      << "\">relative runtime alpha</text>\n";
  for (std::size_t s = 0; s < p.solvers.size(); ++s) {
    const char* c = colors[s % 8];
    out << "<polyline fill=\"none\" stroke=\"" << c
        << "\" stroke-width=\"2\" points=\"";
    // staircase
    for (std::size_t a = 0; a < p.alphas.size(); ++a) {
      if (a > 0) out << X(p.alphas[a]) << ',' << Y(p.rho[s][a - 1]) << ' ';
      out << X(p.alphas[a]) << ',' << Y(p.rho[s][a]) << ' ';
    }
    out << "\"/>\n";
    out << "<text x=\"" << ml + pw + 10 << "\" y=\"" << mt + 16 + 18 * s
        << "\" fill=\"" << c << "\">" << p.solvers[s] << "</text>\n";
  }
  out << "</svg>\n";
}

void write_summary_csv(std::ostream& out,
                       const std::vector<ProblemSummary>& rows) {
  out << "problem_id,cameras,landmarks,observations,obs_per_camera,"
         "obs_per_landmark_mean,obs_per_landmark_std,obs_per_landmark_max\n";
  out << std::fixed;
  for (const auto& r : rows) {
    out << r.problem_id << ',' << r.num_cameras << ',' << r.num_landmarks
        << ',' << r.num_observations << ',' << std::setprecision(1)
        << r.obs_per_camera << ',' << r.obs_per_landmark_mean << ','
        << r.obs_per_landmark_std << ',' << r.obs_per_landmark_max << '\n';
  }
  out << std::defaultfloat;
}

std::string trace_file_name(const ConvergenceTrace& trace) {
  return trace.problem_id + "__" + trace.solver_id + ".csv";
}

std::string tau_label(double tau) {
  std::ostringstream os;
  os << tau;
  return os.str();
}

std::vector<ConvergenceTrace> load_traces(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir))
    throw Error("trace directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (e.path().extension() == ".csv" &&
        name.find("__") != std::string::npos)
      files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<ConvergenceTrace> traces;
  for (const auto& f : files) {
    std::ifstream in(f);
    if (!in) throw Error("cannot read " + f.string());
    for (auto& t : read_trace_csv(in)) traces.push_back(std::move(t));
  }
  return traces;
}

std::vector<std::filesystem::path> emit_outputs(
    const std::vector<ConvergenceTrace>& traces,
    const std::vector<double>& taus,
    const std::vector<ProblemSummary>& summaries,
    const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  std::vector<fs::path> written;
  auto open = [&](const fs::path& p) {
    std::ofstream out(p);
    if (!out) throw Error("cannot write " + p.string());
    written.push_back(p);
    return out;
  };
  if (traces.empty()) {
    auto out = open(out_dir / "traces.csv");
    out << kTraceHeader << '\n';
  }
  for (const auto& t : traces) {
    auto out = open(out_dir / trace_file_name(t));
    write_trace_csv(out, t);
  }
  for (double tau : taus) {
    const PerformanceProfile prof = performance_profile(traces, tau);
    {
      auto out = open(out_dir / ("profile_tau" + tau_label(tau) + ".csv"));
      write_profile_csv(out, prof);
    }
    auto out = open(out_dir / ("profile_tau" + tau_label(tau) + ".svg"));
    write_profile_svg(out, prof);
  }
  auto out = open(out_dir / "sizes.csv");
  write_summary_csv(out, summaries);
  return written;
}

}  // namespace sqrtba
