#include "ddpi/harness/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include <openssl/evp.h>

#include "ddpi/bounds.hpp"
#include "ddpi/csv.hpp"
#include "ddpi/dpi.hpp"
#include "ddpi/errors.hpp"
#include "ddpi/ipi.hpp"
#include "ddpi/lyapunov_riccati.hpp"

namespace ddpi::harness {

namespace fs = std::filesystem;

namespace {

// JSON has no inf or nan; those are stored as their CSV spelling.
Json num(double v) {
  if (std::isfinite(v)) return v;
  return format_real(v);
}

double as_double(const Json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return std::stod(j.get<std::string>());
  return NAN;
}

std::string job_stem(const JobResult& r) {
  return r.seed ? r.run_id + "/seed_" + std::to_string(*r.seed) : r.run_id + "/trace";
}

void run_model_based(const ExperimentConfig& cfg, const RunSpec& spec, JobResult& out) {
  const PiTrace tr = pi_run(cfg.sys, cfg.cost, spec.K1, spec.max_iters, spec.tol);
  std::ostringstream csv;
  CsvWriter w(csv);
  w.header({"iteration", "P_err", "K_err", "lyapunov_residual"});
  for (std::size_t i = 0; i < tr.iterates.size(); ++i) {
    const PiIterate& it = tr.iterates[i];
    w.field(static_cast<long long>(i + 1));
    w.field(it.err);
    w.field((it.K - tr.K_star).norm());
    w.field(lyapunov_residual(cfg.sys, it.K, cfg.cost, it.P));
    w.end_row();
  }
  out.files.emplace_back(job_stem(out) + ".csv", csv.str());
  const PiIterate& last = tr.iterates.back();
  out.summary["iterations"] = tr.iterates.size();
  out.summary["converged"] = tr.converged;
  out.summary["final_P_err"] = num(last.err);
  out.summary["final_K_err"] = num((last.K - tr.K_star).norm());
  out.summary["dare_residual"] = num(dare_residual(cfg.sys, cfg.cost, tr.P_star));
}

void run_ipi(const ExperimentConfig& cfg, const RunSpec& spec, std::uint64_t seed, JobResult& out) {
  IpiConfig ic;
  ic.tau = spec.tau;
  ic.episodes = spec.episodes;
  ic.K1 = spec.K1;
  ic.theta_hat0 = spec.theta0;
  ic.a = spec.a;
  ic.dither = DitherPolicy{spec.dither, spec.dither_cov, seed};
  ic.x0 = spec.x0;
  ic.monitor_assumption2 = spec.monitor_assumption2;
  const IpiTrace tr = ipi_run(cfg.sys, cfg.cost, ic);

  std::ostringstream csv;
  write_trace_csv(tr, csv);
  out.files.emplace_back(job_stem(out) + ".csv", csv.str());
  std::ostringstream pcsv;
  write_report_csv(tr.persistency, pcsv);
  out.files.emplace_back(job_stem(out) + "_persistency.csv", pcsv.str());

  const IpiEpisode& last = tr.episodes.back();
  Json& s = out.summary;
  s["episodes"] = tr.episodes.size();
  s["total_steps"] = tr.total_steps;
  s["final_P_err"] = num(last.P_err);
  s["final_K_err"] = num(last.K_next_err);
  s["final_theta_err"] = num(last.theta_err);
  Json conv = nullptr, conv_steps = nullptr;
  for (const IpiEpisode& ep : tr.episodes) {
    if (ep.K_next_err <= spec.k_tol) {
      conv = ep.episode;
      conv_steps = ep.t_end;
      break;
    }
  }
  s["episodes_to_tol"] = conv;
  s["steps_to_tol"] = conv_steps;
  s["bounds_dominate"] = tr.audit.all();
  s["audit"] = {{"checked", tr.audit.checked},         {"theorem6", tr.audit.theorem6_ok},
                {"corollary3", tr.audit.corollary3_ok}, {"eq33", tr.audit.eq33_ok},
                {"theorem3", tr.audit.theorem3_ok},     {"upper", tr.audit.upper_ok}};
  s["bound_first"] = {{"theorem6", num(tr.episodes.front().theorem6)}, {"eq33", num(tr.episodes.front().eq33)}};
  s["bound_final"] = {{"theorem6", num(last.theorem6)}, {"eq33", num(last.eq33)}};
  s["c_hat"] = num(tr.c_hat);
  s["sigma0"] = num(tr.sigma0);
  s["P0_err"] = num(tr.episodes.front().P_err);
  s["dtheta_upper_final"] = num(tr.dtheta_upper.back());
  s["dtheta_upper_sup"] = num(*std::max_element(tr.dtheta_upper.begin(), tr.dtheta_upper.end()));
  s["jnon_inf"] = tr.persistency.jnon_inf();
  s["N_max"] = tr.persistency.N_max;
  s["alpha_min"] = num(tr.persistency.alpha_min);
  s["persistent"] = tr.persistency.jnon_inf() == 0;
  s["eps_clamped"] = tr.eps_clamped;
  s["eps_max_clamped"] = tr.eps_max_clamped;
  std::uint32_t flags = 0;
  for (const IpiEpisode& ep : tr.episodes) flags |= ep.flags;
  s["flags"] = flags;
}

void run_dpi(const ExperimentConfig& cfg, const RunSpec& spec, std::uint64_t seed, JobResult& out) {
  DpiConfig dc;
  dc.tau = spec.tau;
  dc.episodes = spec.episodes;
  dc.K1 = spec.K1;
  dc.W = spec.dither_cov;
  dc.seed = seed;
  dc.x0 = spec.x0;
  dc.max_gram_cond = spec.max_gram_cond;
  const DpiTrace tr = dpi_run(cfg.sys, cfg.cost, dc);

  std::ostringstream csv;
  write_trace_csv(tr, csv);
  out.files.emplace_back(job_stem(out) + ".csv", csv.str());

  const DpiEpisode& last = tr.episodes.back();
  Json& s = out.summary;
  s["episodes"] = tr.episodes.size();
  s["total_steps"] = tr.total_steps;
  s["final_P_err"] = num(last.P_err);
  s["final_K_err"] = num(last.K_next_err);
  Json conv = nullptr, conv_steps = nullptr;
  bool phi = true, gamma = true;
  double cphi = 0.0, cgamma = 0.0;
  for (const DpiEpisode& ep : tr.episodes) {
    if (conv.is_null() && ep.K_next_err <= spec.k_tol) {
      conv = ep.episode;
      conv_steps = ep.t_end;
    }
    phi = phi && ep.phi_persistent;
    gamma = gamma && ep.gamma_persistent;
    cphi = std::max(cphi, ep.cond_phi);
    cgamma = std::max(cgamma, ep.cond_gamma);
  }
  s["episodes_to_tol"] = conv;
  s["steps_to_tol"] = conv_steps;
  s["persistent"] = phi && gamma;
  s["max_cond_phi"] = num(cphi);
  s["max_cond_gamma"] = num(cgamma);
  s["diverged"] = tr.diverged;
  s["P0_err"] = num(tr.episodes.front().P_err);
}

const std::vector<std::string> kSummaryColumns{
    "run_id",        "method",        "seed",   "status",      "tau",            "tau_required",
    "episodes",      "total_steps",   "final_P_err", "final_K_err", "episodes_to_tol", "steps_to_tol",
    "persistent",    "bounds_dominate", "failed_episode", "message"};

std::string cell(const Json& j) {
  if (j.is_null()) return "";
  if (j.is_boolean()) return j.get<bool>() ? "1" : "0";
  if (j.is_number_unsigned()) return std::to_string(j.get<std::uint64_t>());
  if (j.is_number_integer()) return std::to_string(j.get<long long>());
  if (j.is_number()) return format_real(j.get<double>());
  if (j.is_string()) return j.get<std::string>();
  return j.dump();
}

long long tau_required(Method m, const ExperimentConfig& cfg) {
  if (m == Method::dpi) return min_episode_length(cfg.sys.nx(), cfg.sys.nu());
  if (m == Method::ipi) return 1;
  return 0;
}

}  // namespace

std::vector<Job> expand_jobs(const ExperimentConfig& cfg) {
  std::vector<Job> jobs;
  for (std::size_t r = 0; r < cfg.runs.size(); ++r) {
    if (cfg.runs[r].method == Method::model_based) {
      jobs.push_back({r, std::nullopt});
      continue;
    }
    for (std::uint64_t s : cfg.runs[r].seeds) jobs.push_back({r, s});
  }
  return jobs;
}

JobResult run_job(const ExperimentConfig& cfg, const Job& job) {
  const RunSpec& spec = cfg.runs.at(job.run_index);
  JobResult out;
  out.run_id = spec.id;
  out.method = spec.method;
  out.seed = job.seed;
  try {
    switch (spec.method) {
      case Method::model_based:
        run_model_based(cfg, spec, out);
        break;
      case Method::ipi:
        run_ipi(cfg, spec, *job.seed, out);
        break;
      case Method::dpi:
        run_dpi(cfg, spec, *job.seed, out);
        break;
    }
  } catch (const Underdetermined& e) {
    out.status = "underdetermined";
    out.message = e.what();
    out.files.clear();
    out.summary = Json::object();
    out.summary["failed_episode"] = e.episode();
  } catch (const std::exception& e) {
    out.status = "error";
    out.message = e.what();
    out.files.clear();
    out.summary = Json::object();
  }
  return out;
}

std::string git_blob_hash(const std::string& bytes) {
  const std::string header = "blob " + std::to_string(bytes.size()) + std::string(1, '\0');
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx, header.data(), header.size()) != 1 ||
      EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) != 1 || EVP_DigestFinal_ex(ctx, md, &len) != 1) {
    EVP_MD_CTX_free(ctx);
    throw DdpiError("sha1 digest failed");
  }
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return hex.str();
}

fs::path resolve_output_dir(const ExperimentConfig& cfg) {
  if (const char* root = std::getenv("DDPI_OUTPUT_ROOT"); root && *root) return fs::path(root) / cfg.name;
  return fs::path(cfg.output_dir);
}

RunManifest run_experiment(const ExperimentConfig& cfg, const fs::path& out_dir) {
  const std::vector<Job> jobs = expand_jobs(cfg);
  std::vector<JobResult> results(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) results[i] = run_job(cfg, jobs[i]);
  };
  const std::size_t n_threads = std::min<std::size_t>(cfg.workers, std::max<std::size_t>(jobs.size(), 1));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  fs::create_directories(out_dir);
  RunManifest m;
  m.dir = out_dir;
  Json files = Json::array();
  Json job_list = Json::array();
  std::ostringstream summary_csv;
  CsvWriter sw(summary_csv);
  sw.header(kSummaryColumns);

  for (const JobResult& r : results) {
    Json jf = Json::array();
    for (const auto& [rel, contents] : r.files) {
      const fs::path p = out_dir / rel;
      fs::create_directories(p.parent_path());
      std::ofstream os(p, std::ios::binary);
      os << contents;
      if (!os) throw DdpiError("cannot write " + p.string());
      jf.push_back(rel);
      files.push_back(rel);
    }
    if (r.status != "ok") ++m.failed_jobs;
    const RunSpec& spec = *std::find_if(cfg.runs.begin(), cfg.runs.end(), [&](const RunSpec& s) { return s.id == r.run_id; });
    Json j;
    j["run_id"] = r.run_id;
    j["method"] = method_name(r.method);
    j["seed"] = r.seed ? Json(*r.seed) : Json(nullptr);
    j["status"] = r.status;
    j["message"] = r.message;
    j["files"] = jf;
    j["summary"] = r.summary;

    const Json& s = r.summary;
    auto get = [&](const char* k) { return s.contains(k) ? s.at(k) : Json(nullptr); };
    const bool iterative = r.method != Method::model_based;
    sw.field(r.run_id);
    sw.field(method_name(r.method));
    sw.field(r.seed ? std::to_string(*r.seed) : std::string());
    sw.field(r.status);
    sw.field(iterative ? std::to_string(spec.tau) : std::string());
    sw.field(iterative ? std::to_string(tau_required(r.method, cfg)) : std::string());
    sw.field(cell(r.method == Method::model_based ? get("iterations") : get("episodes")));
    sw.field(cell(get("total_steps")));
    sw.field(cell(get("final_P_err")));
    sw.field(cell(get("final_K_err")));
    sw.field(cell(get("episodes_to_tol")));
    sw.field(cell(get("steps_to_tol")));
    sw.field(cell(get("persistent")));
    sw.field(cell(get("bounds_dominate")));
    sw.field(cell(get("failed_episode")));
    sw.field(r.message);
    sw.end_row();
    job_list.push_back(std::move(j));
  }
  {
    std::ofstream os(out_dir / "summary.csv", std::ios::binary);
    os << summary_csv.str();
  }
  files.push_back("summary.csv");

  Json runs = Json::array();
  for (const RunSpec& r : cfg.runs) {
    Json jr;
    jr["id"] = r.id;
    jr["method"] = method_name(r.method);
    if (r.method != Method::model_based) {
      jr["tau"] = r.tau;
      jr["tau_required"] = tau_required(r.method, cfg);
      jr["episodes"] = r.episodes;
      jr["horizon"] = r.horizon;
      jr["seeds"] = r.seeds;
    }
    runs.push_back(std::move(jr));
  }

  Json& mj = m.json;
  mj["name"] = cfg.name;
  mj["config_hash"] = git_blob_hash(cfg.source_text);
  mj["config"] = cfg.source_text;
  mj["nx"] = cfg.sys.nx();
  mj["nu"] = cfg.sys.nu();
  mj["runs"] = runs;
  mj["jobs"] = job_list;
  mj["files"] = files;
  mj["failed_jobs"] = m.failed_jobs;
  mj["complete"] = true;
  std::ofstream os(out_dir / "manifest.json", std::ios::binary);
  os << mj.dump(2) << '\n';
  if (!os) throw DdpiError("cannot write manifest");
  return m;
}

Json load_manifest(const fs::path& manifest_path) {
  std::ifstream in(manifest_path, std::ios::binary);
  if (!in) throw ConfigError("cannot read manifest " + manifest_path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("malformed manifest: ") + e.what());
  }
  for (const char* key : {"name", "runs", "jobs", "files", "complete", "nx", "nu"}) {
    if (!j.contains(key)) throw ConfigError(std::string("incomplete manifest: missing '") + key + "'");
  }
  if (!j.at("complete").get<bool>()) throw ConfigError("incomplete manifest: run did not finish");
  const fs::path dir = manifest_path.parent_path();
  for (const auto& f : j.at("files")) {
    if (!fs::exists(dir / f.get<std::string>())) {
      throw ConfigError("incomplete manifest: missing file " + f.get<std::string>());
    }
  }
  return j;
}

void summarize(const Json& manifest, std::ostream& os) {
  struct RunAgg {
    std::string method;
    long long tau = 0, tau_required = 0;
    std::size_t jobs = 0, ok = 0, converged = 0, dominated = 0, persistent = 0;
    std::vector<double> conv_episodes;
    double worst_final_K = 0.0;
    double theorem6_final = NAN, eq33_final = NAN;
    std::string failure;
    const Json* first_ok = nullptr;
  };
  std::map<std::string, RunAgg> agg;
  std::vector<std::string> order;
  for (const auto& r : manifest.at("runs")) {
    const std::string id = r.at("id").get<std::string>();
    order.push_back(id);
    RunAgg& a = agg[id];
    a.method = r.at("method").get<std::string>();
    if (r.contains("tau")) {
      a.tau = r.at("tau").get<long long>();
      a.tau_required = r.at("tau_required").get<long long>();
    }
  }
  for (const auto& j : manifest.at("jobs")) {
    RunAgg& a = agg.at(j.at("run_id").get<std::string>());
    ++a.jobs;
    const Json& s = j.at("summary");
    if (j.at("status").get<std::string>() != "ok") {
      if (a.failure.empty()) {
        a.failure = j.at("status").get<std::string>() == "underdetermined" ? "Underdetermined" : "error";
        if (s.contains("failed_episode")) a.failure += " (episode " + cell(s.at("failed_episode")) + ")";
      }
      continue;
    }
    ++a.ok;
    if (!a.first_ok) a.first_ok = &s;
    if (a.method == "model-based" && s.value("converged", false)) {
      ++a.converged;
      a.conv_episodes.push_back(s.at("iterations").get<double>());
    }
    if (s.contains("episodes_to_tol") && !s.at("episodes_to_tol").is_null()) {
      ++a.converged;
      a.conv_episodes.push_back(s.at("episodes_to_tol").get<double>());
    }
    if (s.value("bounds_dominate", false)) ++a.dominated;
    if (s.value("persistent", false)) ++a.persistent;
    a.worst_final_K = std::max(a.worst_final_K, as_double(s.at("final_K_err")));
    if (s.contains("bound_final")) {
      a.theorem6_final = std::max(std::isnan(a.theorem6_final) ? 0.0 : a.theorem6_final, as_double(s.at("bound_final").at("theorem6")));
      a.eq33_final = std::max(std::isnan(a.eq33_final) ? 0.0 : a.eq33_final, as_double(s.at("bound_final").at("eq33")));
    }
  }

  auto frac = [](std::size_t k, std::size_t n) { return std::to_string(k) + "/" + std::to_string(n); };
  auto sci = [](double v) {
    if (std::isnan(v)) return std::string("");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return std::string(buf);
  };

  os << "experiment " << manifest.at("name").get<std::string>() << "\n\n";
  os << std::left << std::setw(16) << "run" << std::setw(13) << "method" << std::setw(6) << "tau" << std::setw(9)
     << "tau_min" << std::setw(12) << "persistent" << std::setw(11) << "converged" << std::setw(10) << "conv_ep"
     << std::setw(12) << "max_K_err" << std::setw(10) << "bounds" << std::setw(12) << "thm6_final" << std::setw(12)
     << "eq33_final"
     << "status\n";
  for (const std::string& id : order) {
    const RunAgg& a = agg.at(id);
    const bool ident = a.method != "model-based";
    std::string conv_ep;
    if (!a.conv_episodes.empty()) {
      std::vector<double> v = a.conv_episodes;
      std::sort(v.begin(), v.end());
      conv_ep = std::to_string(static_cast<long long>(v[v.size() / 2]));
    }
    std::string status = a.failure.empty() ? "ok" : a.failure;
    if (!a.failure.empty() && a.ok > 0) status += " in " + frac(a.jobs - a.ok, a.jobs);
    os << std::setw(16) << id << std::setw(13) << a.method << std::setw(6) << (ident ? std::to_string(a.tau) : "")
       << std::setw(9) << (ident ? std::to_string(a.tau_required) : "") << std::setw(12)
       << (ident && a.ok ? frac(a.persistent, a.ok) : "") << std::setw(11) << (a.ok ? frac(a.converged, a.ok) : "")
       << std::setw(10) << conv_ep << std::setw(12) << (a.ok ? sci(a.worst_final_K) : "") << std::setw(10)
       << (a.method == "ipi" && a.ok ? frac(a.dominated, a.ok) : "") << std::setw(12) << sci(a.theorem6_final)
       << std::setw(12) << sci(a.eq33_final) << status << "\n";
  }

  // Equal time budget: every persistently excited IPI run against the DPI sample minimum.
  const long long tau_dpi = min_episode_length(manifest.at("nx").get<long long>(), manifest.at("nu").get<long long>());
  bool header = false;
  for (const std::string& id : order) {
    const RunAgg& a = agg.at(id);
    if (a.method != "ipi" || !a.first_ok) continue;
    const Json& s = *a.first_ok;
    if (!s.value("persistent", false)) continue;
    const Json* run = nullptr;
    for (const auto& r : manifest.at("runs")) {
      if (r.at("id").get<std::string>() == id) run = &r;
    }
    const long long T = run->at("horizon").get<long long>();
    BudgetRow b;
    try {
      b = equal_budget(T, a.tau, tau_dpi, as_double(s.at("c_hat")), as_double(s.at("P0_err")),
                       as_double(s.at("sigma0")), as_double(s.at("dtheta_upper_sup")));
    } catch (const DdpiError&) {
      continue;
    }
    if (!header) {
      os << "\nequal time budget (DPI at its minimum episode length " << tau_dpi << ")\n";
      os << std::setw(16) << "run" << std::setw(8) << "T" << std::setw(9) << "tau_ipi" << std::setw(9) << "tau_dpi"
         << std::setw(8) << "ep_ipi" << std::setw(8) << "ep_dpi" << std::setw(12) << "f_ipi" << "f_dpi\n";
      header = true;
    }
    os << std::setw(16) << id << std::setw(8) << b.T << std::setw(9) << b.tau_ipi << std::setw(9) << b.tau_dpi
       << std::setw(8) << b.episodes_ipi << std::setw(8) << b.episodes_dpi << std::setw(12) << sci(b.at_budget.f_ipi)
       << sci(b.at_budget.f_dpi) << "\n";
  }
}

}  // namespace ddpi::harness
