#include "colang/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

namespace colang {

Experiment parse_experiment(const std::string& name) {
  if (name == "train") return Experiment::Train;
  if (name == "curvature-study") return Experiment::CurvatureStudy;
  if (name == "ortho-depth-study") return Experiment::OrthoDepthStudy;
  if (name == "sample-verify") return Experiment::SampleVerify;
  if (name == "gradcheck") return Experiment::Gradcheck;
  throw ConfigError("unknown experiment '" + name + "'");
}

std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::Train:
      return "train";
    case Experiment::CurvatureStudy:
      return "curvature-study";
    case Experiment::OrthoDepthStudy:
      return "ortho-depth-study";
    case Experiment::SampleVerify:
      return "sample-verify";
    case Experiment::Gradcheck:
      return "gradcheck";
  }
  return "?";
}

double DataConfig::noise() const {
  if (sigma) return *sigma;
  return dataset == "spiral4" ? 0.02 : 0.05;
}

std::vector<LayerConstraint> OptimizerConfig::constraints(std::size_t layers) const {
  std::vector<LayerConstraint> out(layers);
  switch (required_constraint(method)) {
    case ConstraintKind::None:
      break;
    case ConstraintKind::Circle:
      for (std::size_t l = 0; l < layers; ++l) {
        auto it = radii.find(l);
        const double r = it != radii.end() ? it->second : radius.value_or(0.0);
        out[l] = {ConstraintKind::Circle, r};
      }
      break;
    case ConstraintKind::Orthogonal:
      for (std::size_t l = 0; l < layers; ++l) {
        const bool hidden_only = orth_layers == "hidden";
        if (!hidden_only || (l > 0 && l + 1 < layers)) out[l] = {ConstraintKind::Orthogonal, 0.0};
      }
      break;
  }
  return out;
}

bool OptimizerConfig::has_radii(std::size_t layers) const {
  if (radius) return true;
  for (std::size_t l = 0; l < layers; ++l)
    if (!radii.contains(l)) return false;
  return true;
}

std::vector<std::uint64_t> RunSettings::seeds() const {
  if (!seed_list.empty()) return seed_list;
  std::vector<std::uint64_t> out(seed_count);
  for (std::size_t k = 0; k < seed_count; ++k) out[k] = seed + k;
  return out;
}

std::vector<Variant> RunConfig::effective_variants() const {
  if (!variants.empty()) return variants;
  return {Variant{"", optimizer}};
}

ConfigParseError::ConfigParseError(const std::string& message, std::size_t line)
    : ConfigError(line ? "line " + std::to_string(line) + ": " + message : message), line_(line) {}

namespace {

std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

struct Entry {
  std::string key;
  std::string value;
  std::size_t line;
};

struct Section {
  std::string name;     // "experiment", "optimizer", "variant", ...
  std::string variant;  // for [variant NAME]
  std::size_t line = 0;
  std::vector<Entry> entries;
};

double to_double(const Entry& e) {
  double v = 0.0;
  const auto* end = e.value.data() + e.value.size();
  auto [ptr, ec] = std::from_chars(e.value.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw ConfigParseError("'" + e.key + "' expects a number, got '" + e.value + "'", e.line);
  }
  return v;
}

std::uint64_t to_count(const Entry& e, const std::string& text) {
  std::uint64_t v = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw ConfigParseError("'" + e.key + "' expects a non-negative integer, got '" + text + "'",
                           e.line);
  }
  return v;
}

std::uint64_t to_count(const Entry& e) { return to_count(e, e.value); }

template <class T>
std::vector<T> to_list(const Entry& e) {
  std::vector<T> out;
  std::stringstream ss(e.value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    out.push_back(static_cast<T>(to_count(e, item)));
  }
  if (out.empty()) throw ConfigParseError("'" + e.key + "' expects a list of integers", e.line);
  return out;
}

bool to_bool(const Entry& e) {
  if (e.value == "true" || e.value == "1" || e.value == "yes") return true;
  if (e.value == "false" || e.value == "0" || e.value == "no") return false;
  throw ConfigParseError("'" + e.key + "' expects true or false, got '" + e.value + "'", e.line);
}

template <class Fn>
auto wrap(const Entry& e, Fn fn) {
  try {
    return fn();
  } catch (const ConfigParseError&) {
    throw;
  } catch (const std::exception& ex) {
    throw ConfigParseError(ex.what(), e.line);
  }
}

[[noreturn]] void unknown_key(const Entry& e, const std::string& section) {
  throw ConfigParseError("unknown key '" + e.key + "' in [" + section + "]", e.line);
}

void apply_optimizer(OptimizerConfig& o, const Entry& e, const std::string& section) {
  const std::string& k = e.key;
  if (k == "name" || k == "optimizer") {
    o.method = wrap(e, [&] { return parse_method(e.value); });
  } else if (k == "h") {
    o.hyper.h = to_double(e);
  } else if (k == "gamma") {
    o.hyper.gamma = to_double(e);
  } else if (k == "tau") {
    o.hyper.tau = to_double(e);
  } else if (k == "momentum") {
    o.hyper.momentum = to_double(e);
  } else if (k == "weight_decay") {
    o.hyper.weight_decay = to_double(e);
  } else if (k == "split") {
    o.hyper.split = e.value;
  } else if (k == "qn_iterations") {
    o.hyper.qn_iterations = to_count(e);
  } else if (k == "qn_tol") {
    o.hyper.qn_tol = to_double(e);
  } else if (k == "radius") {
    o.radius = to_double(e);
  } else if (k == "orth_layers") {
    if (e.value != "all" && e.value != "hidden") {
      throw ConfigParseError("orth_layers must be 'all' or 'hidden'", e.line);
    }
    o.orth_layers = e.value;
  } else if (k.size() > 1 && k[0] == 'r' &&
             std::all_of(k.begin() + 1, k.end(), [](unsigned char c) { return std::isdigit(c); })) {
    o.radii[to_count(e, k.substr(1))] = to_double(e);
  } else {
    unknown_key(e, section);
  }
}

void apply(RunConfig& c, const Section& s, const Entry& e) {
  const std::string& k = e.key;
  if (s.name == "experiment") {
    if (k == "kind" || k == "type") {
      c.experiment = wrap(e, [&] { return parse_experiment(e.value); });
    } else {
      unknown_key(e, s.name);
    }
  } else if (s.name == "data") {
    if (k == "dataset") {
      if (e.value != "spiral2" && e.value != "spiral4") {
        throw ConfigParseError("dataset must be spiral2 or spiral4", e.line);
      }
      c.data.dataset = e.value;
    } else if (k == "train_size") {
      c.data.train_size = to_count(e);
    } else if (k == "test_size") {
      c.data.test_size = to_count(e);
    } else if (k == "sigma") {
      c.data.sigma = to_double(e);
    } else if (k == "batch_fraction") {
      c.data.batch_fraction = to_double(e);
    } else {
      unknown_key(e, s.name);
    }
  } else if (s.name == "model") {
    if (k == "hidden") {
      c.model.hidden = to_list<std::size_t>(e);
    } else if (k == "activation") {
      c.model.activation = wrap(e, [&] { return parse_activation(e.value); });
    } else if (k == "init") {
      if (e.value != "standard" && e.value != "orthogonal") {
        throw ConfigParseError("init must be 'standard' or 'orthogonal'", e.line);
      }
      c.model.init = e.value;
    } else {
      unknown_key(e, s.name);
    }
  } else if (s.name == "optimizer") {
    apply_optimizer(c.optimizer, e, s.name);
  } else if (s.name == "variant") {
    apply_optimizer(c.variants.back().optimizer, e, "variant " + s.variant);
  } else if (s.name == "run") {
    if (k == "epochs") {
      c.run.epochs = to_count(e);
    } else if (k == "eval_every") {
      c.run.eval_every = to_count(e);
    } else if (k == "seed") {
      c.run.seed = to_count(e);
    } else if (k == "seeds") {
      c.run.seed_count = to_count(e);
    } else if (k == "seed_list") {
      c.run.seed_list = to_list<std::uint64_t>(e);
    } else if (k == "threads") {
      c.run.threads = to_count(e);
    } else if (k == "output") {
      c.run.output = e.value;
    } else if (k == "grid_resolution") {
      c.run.grid_resolution = to_count(e);
    } else if (k == "export_grids") {
      c.run.export_grids = to_bool(e);
    } else if (k == "cross_section_points") {
      c.run.cross_section_points = to_count(e);
    } else {
      unknown_key(e, s.name);
    }
  } else if (s.name == "study") {
    if (k == "depths") {
      c.study.depths = to_list<std::size_t>(e);
    } else if (k == "width") {
      c.study.width = to_count(e);
    } else {
      unknown_key(e, s.name);
    }
  } else if (s.name == "sampler") {
    if (k == "beta") {
      c.sampler.beta = to_double(e);
    } else if (k == "radius") {
      c.sampler.radius = to_double(e);
    } else if (k == "h") {
      c.sampler.h = to_double(e);
    } else if (k == "samples") {
      c.sampler.samples = to_count(e);
    } else if (k == "burn_in") {
      c.sampler.burn_in = to_count(e);
    } else if (k == "thin") {
      c.sampler.thin = to_count(e);
    } else if (k == "bins") {
      c.sampler.bins = to_count(e);
    } else if (k == "clt_runs") {
      c.sampler.clt_runs = to_count(e);
    } else if (k == "clt_samples") {
      c.sampler.clt_samples = to_count(e);
    } else {
      unknown_key(e, s.name);
    }
  } else if (s.name == "gradcheck") {
    if (k == "widths") {
      c.gradcheck.widths = to_list<std::size_t>(e);
    } else if (k == "batch") {
      c.gradcheck.batch = to_count(e);
    } else if (k == "trials") {
      c.gradcheck.trials = to_count(e);
    } else if (k == "epsilon") {
      c.gradcheck.epsilon = to_double(e);
    } else if (k == "threshold") {
      c.gradcheck.threshold = to_double(e);
    } else if (k == "zero_weights") {
      c.gradcheck.zero_weights = to_bool(e);
    } else if (k == "corrupt") {
      c.gradcheck.corrupt = to_bool(e);
    } else {
      unknown_key(e, s.name);
    }
  }
}

const std::vector<std::string> kSections = {"experiment", "data",    "model",     "optimizer",
                                            "run",        "study",   "sampler",   "gradcheck"};

std::vector<Section> tokenize(std::istream& in) {
  std::vector<Section> sections;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigParseError("unterminated section header", line_no);
      std::string name = trim(line.substr(1, line.size() - 2));
      Section s;
      s.line = line_no;
      if (name.rfind("variant", 0) == 0 && name.size() > 7 && std::isspace(static_cast<unsigned char>(name[7]))) {
        s.name = "variant";
        s.variant = trim(name.substr(7));
      } else if (std::find(kSections.begin(), kSections.end(), name) != kSections.end()) {
        s.name = name;
      } else {
        throw ConfigParseError("unknown section [" + name + "]", line_no);
      }
      sections.push_back(std::move(s));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigParseError("expected 'key = value', got '" + line + "'", line_no);
    }
    if (sections.empty()) throw ConfigParseError("key outside of any [section]", line_no);
    Entry e{trim(line.substr(0, eq)), trim(line.substr(eq + 1)), line_no};
    if (e.key.empty()) throw ConfigParseError("empty key", line_no);
    sections.back().entries.push_back(std::move(e));
  }
  return sections;
}

RunConfig build(const std::vector<Section>& sections) {
  RunConfig c;
  std::map<std::string, std::size_t> variant_lines;
  // The base optimizer must be complete before variants copy it.
  for (const auto& s : sections) {
    if (s.name == "variant") continue;
    for (const auto& e : s.entries) apply(c, s, e);
  }
  for (const auto& s : sections) {
    if (s.name != "variant") continue;
    if (s.variant.empty()) throw ConfigParseError("variant needs a name", s.line);
    if (variant_lines.contains(s.variant)) {
      throw ConfigParseError("duplicate variant '" + s.variant + "'", s.line);
    }
    variant_lines[s.variant] = s.line;
    c.variants.push_back({s.variant, c.optimizer});
    for (const auto& e : s.entries) apply(c, s, e);
  }

  auto section_line = [&](const std::string& variant) -> std::size_t {
    for (const auto& s : sections) {
      if (variant.empty() ? s.name == "optimizer" : s.name == "variant" && s.variant == variant) {
        return s.line;
      }
    }
    return 0;
  };
  try {
    validate(c);
  } catch (const ConfigParseError&) {
    throw;
  } catch (const ConfigError& ex) {
    // Attribute optimizer problems to the section that declared them.
    std::size_t line = 0;
    for (const auto& v : c.effective_variants()) {
      const std::string what = ex.what();
      if (!v.name.empty() && what.find("'" + v.name + "'") != std::string::npos) {
        line = section_line(v.name);
      }
    }
    if (line == 0) line = section_line("");
    throw ConfigParseError(ex.what(), line);
  }
  return c;
}

}  // namespace

void validate(const RunConfig& c) {
  if (c.experiment == Experiment::SampleVerify || c.experiment == Experiment::Gradcheck) {
    if (c.experiment == Experiment::Gradcheck && c.gradcheck.widths.size() < 2) {
      throw ConfigError("gradcheck widths need at least an input and an output width");
    }
    return;
  }
  if (!(c.data.batch_fraction > 0.0 && c.data.batch_fraction <= 1.0)) {
    throw ConfigError("batch_fraction must lie in (0, 1]");
  }
  if (c.data.train_size < 2 || c.data.train_size % 2 || c.data.test_size < 2 ||
      c.data.test_size % 2) {
    throw ConfigError("train_size and test_size must be even and at least 2");
  }
  if (c.run.eval_every == 0) throw ConfigError("eval_every must be at least 1");
  std::size_t layers = c.model.hidden.size() + 1;
  if (c.experiment == Experiment::OrthoDepthStudy) {
    if (c.study.depths.empty()) throw ConfigError("study depths must not be empty");
    layers = *std::max_element(c.study.depths.begin(), c.study.depths.end()) + 1;
  }
  for (const auto& v : c.effective_variants()) {
    const std::string where = v.name.empty() ? "" : " (variant '" + v.name + "')";
    const auto& o = v.optimizer;
    if (!(o.hyper.h > 0.0)) throw ConfigError("step size h must be positive" + where);
    if (o.hyper.tau < 0.0 || o.hyper.gamma < 0.0 || o.hyper.weight_decay < 0.0) {
      throw ConfigError("tau, gamma and weight_decay must be non-negative" + where);
    }
    if (o.hyper.momentum < 0.0 || o.hyper.momentum >= 1.0) {
      throw ConfigError("momentum must lie in [0, 1)" + where);
    }
    if (is_underdamped(o.method)) {
      if (o.hyper.split.empty()) throw ConfigError("split must not be empty" + where);
      for (char ch : o.hyper.split) {
        if (ch != 'A' && ch != 'B' && ch != 'O') {
          throw ConfigError("split may only contain A, B and O" + where);
        }
      }
    }
    if (required_constraint(o.method) == ConstraintKind::Circle) {
      if (!o.has_radii(layers)) throw ConfigError("circle constraint requires radii" + where);
      for (const auto& lc : o.constraints(layers)) {
        if (!(lc.radius > 0.0)) throw ConfigError("radii must be positive" + where);
      }
    }
  }
}

RunConfig parse_config_string(const std::string& text) {
  std::istringstream in(text);
  return build(tokenize(in));
}

RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigParseError("cannot open config file " + path.string(), 0);
  return build(tokenize(in));
}

}  // namespace colang
