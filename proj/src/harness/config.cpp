#include "ddpi/harness/config.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "ddpi/csv.hpp"
#include "ddpi/errors.hpp"

namespace ddpi::harness {

namespace pt = boost::property_tree;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<double> parse_numbers(const std::string& row, const std::string& context) {
  std::string clean = row;
  std::replace(clean.begin(), clean.end(), ',', ' ');
  std::istringstream is(clean);
  std::vector<double> out;
  std::string tok;
  while (is >> tok) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size()) throw ConfigError("not a number '" + tok + "' in " + context);
    out.push_back(v);
  }
  return out;
}

void check_keys(const std::string& section, const pt::ptree& tree, const std::set<std::string>& allowed) {
  for (const auto& [key, child] : tree) {
    if (!child.empty()) throw ConfigError("nested entries are not supported in [" + section + "]");
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in [" + section + "]");
  }
}

std::string get_required(const pt::ptree& tree, const std::string& section, const std::string& key) {
  const auto v = tree.get_optional<std::string>(key);
  if (!v) throw ConfigError("missing key '" + key + "' in [" + section + "]");
  return trim(*v);
}

template <class T>
T parse_number(const std::string& s, const std::string& context) {
  std::istringstream is(s);
  T v{};
  is >> v;
  std::string rest;
  if (is.fail() || (is >> rest)) throw ConfigError("invalid value '" + s + "' for " + context);
  return v;
}

std::size_t parse_count(const std::string& s, const std::string& context) {
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
    throw ConfigError("expected a nonnegative integer for " + context + ", got '" + s + "'");
  }
  return parse_number<std::size_t>(s, context);
}

bool parse_bool(const std::string& s, const std::string& context) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError("expected a boolean for " + context + ", got '" + s + "'");
}

Method parse_method(const std::string& s) {
  if (s == "model-based") return Method::model_based;
  if (s == "ipi") return Method::ipi;
  if (s == "dpi") return Method::dpi;
  throw ConfigError("unknown method '" + s + "' (expected model-based, ipi or dpi)");
}

DitherKind parse_dither(const std::string& s) {
  if (s == "zero") return DitherKind::zero;
  if (s == "gaussian") return DitherKind::gaussian;
  if (s == "paired") return DitherKind::paired;
  throw ConfigError("unknown dither '" + s + "' (expected zero, gaussian or paired)");
}

const std::set<std::string> kCommonRunKeys{"method", "K1", "x0"};
const std::set<std::string> kModelBasedKeys{"max_iters", "tol"};
const std::set<std::string> kIpiKeys{"tau", "horizon", "episodes", "dither", "dither_cov", "seeds", "a", "theta0",
                                     "monitor_assumption2", "k_tol"};
const std::set<std::string> kDpiKeys{"tau", "horizon", "episodes", "dither_cov", "seeds", "max_gram_cond", "k_tol"};

RunSpec parse_run(const std::string& id, const pt::ptree& t, Eigen::Index nx, Eigen::Index nu) {
  const std::string sec = "run:" + id;
  RunSpec r;
  r.id = id;
  r.method = parse_method(get_required(t, sec, "method"));
  std::set<std::string> allowed = kCommonRunKeys;
  const auto& extra = r.method == Method::model_based ? kModelBasedKeys : r.method == Method::ipi ? kIpiKeys : kDpiKeys;
  allowed.insert(extra.begin(), extra.end());
  check_keys(sec, t, allowed);

  r.K1 = parse_matrix(get_required(t, sec, "K1"));
  if (r.K1.rows() != nu || r.K1.cols() != nx) throw ConfigError("K1 in [" + sec + "] must be nu x nx");
  if (auto v = t.get_optional<std::string>("x0")) {
    r.x0 = parse_vector(trim(*v));
    if (r.x0.size() != nx) throw ConfigError("x0 in [" + sec + "] must have nx entries");
  } else {
    r.x0 = Eigen::VectorXd::Ones(nx);
  }

  if (r.method == Method::model_based) {
    if (auto v = t.get_optional<std::string>("max_iters")) r.max_iters = static_cast<int>(parse_count(trim(*v), sec + ".max_iters"));
    if (auto v = t.get_optional<std::string>("tol")) r.tol = parse_number<double>(trim(*v), sec + ".tol");
    if (r.max_iters < 1 || !(r.tol > 0.0)) throw ConfigError("[" + sec + "] needs max_iters >= 1 and tol > 0");
    return r;
  }

  r.tau = parse_count(get_required(t, sec, "tau"), sec + ".tau");
  if (r.tau < 1) throw ConfigError("tau in [" + sec + "] must be at least 1");
  const auto horizon = t.get_optional<std::string>("horizon");
  const auto episodes = t.get_optional<std::string>("episodes");
  if (horizon.has_value() == episodes.has_value()) {
    throw ConfigError("[" + sec + "] needs exactly one of horizon or episodes");
  }
  if (horizon) {
    r.horizon = parse_count(trim(*horizon), sec + ".horizon");
    r.episodes = r.horizon / r.tau;
  } else {
    r.episodes = parse_count(trim(*episodes), sec + ".episodes");
    r.horizon = r.episodes * r.tau;
  }
  if (r.episodes < 1) throw ConfigError("[" + sec + "] must run at least one episode");

  const std::string seeds = get_required(t, sec, "seeds");
  std::istringstream ss(seeds);
  std::string tok;
  while (ss >> tok) r.seeds.push_back(parse_number<std::uint64_t>(tok, sec + ".seeds"));
  if (r.seeds.empty()) throw ConfigError("[" + sec + "] lists no seeds");
  if (std::set<std::uint64_t>(r.seeds.begin(), r.seeds.end()).size() != r.seeds.size()) {
    throw ConfigError("[" + sec + "] lists a seed twice");
  }
  if (auto v = t.get_optional<std::string>("k_tol")) r.k_tol = parse_number<double>(trim(*v), sec + ".k_tol");

  if (r.method == Method::ipi) {
    r.dither = parse_dither(get_required(t, sec, "dither"));
    if (r.dither != DitherKind::zero) r.dither_cov = parse_matrix(get_required(t, sec, "dither_cov"));
    else if (t.get_optional<std::string>("dither_cov")) throw ConfigError("[" + sec + "] sets dither_cov with zero dither");
    r.a = parse_number<double>(get_required(t, sec, "a"), sec + ".a");
    if (!(r.a > 0.0)) throw ConfigError("a in [" + sec + "] must be positive");
    if (auto v = t.get_optional<std::string>("theta0")) {
      const std::string s = trim(*v);
      if (s != "zero") r.theta0 = parse_matrix(s);
    }
    if (r.theta0.size() == 0) r.theta0 = Eigen::MatrixXd::Zero(nx, nx + nu);
    if (r.theta0.rows() != nx || r.theta0.cols() != nx + nu) throw ConfigError("theta0 in [" + sec + "] must be nx x (nx+nu)");
    if (auto v = t.get_optional<std::string>("monitor_assumption2")) r.monitor_assumption2 = parse_bool(trim(*v), sec + ".monitor_assumption2");
  } else {
    r.dither = DitherKind::paired;
    r.dither_cov = parse_matrix(get_required(t, sec, "dither_cov"));
    if (r.tau % 2 != 0) throw ConfigError("tau in [" + sec + "] must be even for dpi");
    if (auto v = t.get_optional<std::string>("max_gram_cond")) r.max_gram_cond = parse_number<double>(trim(*v), sec + ".max_gram_cond");
  }
  if (r.dither_cov.size() != 0 && (r.dither_cov.rows() != nu || r.dither_cov.cols() != nu)) {
    throw ConfigError("dither_cov in [" + sec + "] must be nu x nu");
  }
  return r;
}

}  // namespace

const char* method_name(Method m) {
  switch (m) {
    case Method::model_based:
      return "model-based";
    case Method::ipi:
      return "ipi";
    case Method::dpi:
      return "dpi";
  }
  return "?";
}

Eigen::MatrixXd parse_matrix(const std::string& s) {
  std::vector<std::vector<double>> rows;
  std::string row;
  std::istringstream is(s);
  while (std::getline(is, row, ';')) {
    if (trim(row).empty()) continue;
    rows.push_back(parse_numbers(row, "matrix '" + s + "'"));
  }
  if (rows.empty()) throw ConfigError("empty matrix");
  const std::size_t cols = rows.front().size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols) throw ConfigError("ragged matrix '" + s + "'");
    for (std::size_t j = 0; j < cols; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return m;
}

Eigen::VectorXd parse_vector(const std::string& s) {
  const auto v = parse_numbers(s, "vector '" + s + "'");
  if (v.empty()) throw ConfigError("empty vector");
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::string format_matrix(const Eigen::MatrixXd& m) {
  std::string out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (i) out += "; ";
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out += ' ';
      out += format_real(m(i, j));
    }
  }
  return out;
}

ExperimentConfig parse_config(const std::string& text) {
  pt::ptree root;
  try {
    std::istringstream is(text);
    pt::read_ini(is, root);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }

  ExperimentConfig cfg;
  cfg.source_text = text;
  const pt::ptree* experiment = nullptr;
  const pt::ptree* system = nullptr;
  const pt::ptree* cost = nullptr;
  std::vector<std::pair<std::string, const pt::ptree*>> runs;
  for (const auto& [name, sec] : root) {
    if (sec.empty() && !sec.data().empty()) throw ConfigError("key '" + name + "' outside any section");
    if (name == "experiment") experiment = &sec;
    else if (name == "system") system = &sec;
    else if (name == "cost") cost = &sec;
    else if (name.rfind("run:", 0) == 0 && name.size() > 4) runs.emplace_back(name.substr(4), &sec);
    else throw ConfigError("unknown section [" + name + "]");
  }
  if (!experiment || !system || !cost) throw ConfigError("config needs [experiment], [system] and [cost] sections");

  check_keys("experiment", *experiment, {"name", "output_dir", "workers"});
  cfg.name = get_required(*experiment, "experiment", "name");
  if (cfg.name.empty() || cfg.name.find_first_of("/\\") != std::string::npos) throw ConfigError("experiment name must be a plain identifier");
  cfg.output_dir = experiment->get<std::string>("output_dir", "out/" + cfg.name);
  if (auto w = experiment->get_optional<std::string>("workers")) {
    cfg.workers = static_cast<unsigned>(parse_count(trim(*w), "experiment.workers"));
    if (cfg.workers < 1) throw ConfigError("workers must be at least 1");
  }

  check_keys("system", *system, {"A", "B"});
  cfg.sys.A = parse_matrix(get_required(*system, "system", "A"));
  cfg.sys.B = parse_matrix(get_required(*system, "system", "B"));
  check_keys("cost", *cost, {"Q", "R"});
  cfg.cost.Q = parse_matrix(get_required(*cost, "cost", "Q"));
  cfg.cost.R = parse_matrix(get_required(*cost, "cost", "R"));
  try {
    cfg.sys.validate();
    cfg.cost.validate(cfg.sys.nx(), cfg.sys.nu());
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }

  std::set<std::string> ids;
  for (const auto& [id, sec] : runs) {
    if (!ids.insert(id).second) throw ConfigError("duplicate run id '" + id + "'");
    if (id.find_first_of("/\\ ") != std::string::npos) throw ConfigError("run id '" + id + "' must be a plain identifier");
    cfg.runs.push_back(parse_run(id, *sec, cfg.sys.nx(), cfg.sys.nu()));
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace ddpi::harness
