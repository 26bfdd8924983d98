#include "lgv/harness.hpp"

#include "lgv/error.hpp"
#include "lgv/format.hpp"
#include "lgv/rng.hpp"

#include <cstdio>
#include <cstdlib>
#include <set>

namespace lgv {

using nlohmann::json;

namespace {

// Reads fields out of one JSON object and rejects keys nobody asked for.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where("") + " must be an object");
  }
  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  void mark(const std::string& key) { seen_.insert(key); }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!has(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where(key) + " has the wrong type");
    }
  }

  template <typename T>
  void get(const std::string& key, std::optional<T>& out) {
    seen_.insert(key);
    if (!has(key)) return;
    T v{};
    get(key, v);
    out = v;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError("unknown config field '" + where(k) + "'");
    }
  }

  std::string where(const std::string& key) const {
    if (key.empty()) return path_.empty() ? "config" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ConfigError("config field '" + field + "' " + what);
}

Generator parse_generator(const std::string& s, const std::string& field) {
  if (s == "blobs") return Generator::blobs;
  if (s == "spirals") return Generator::spirals;
  if (s == "idx_file") return Generator::idx_file;
  throw ConfigError("config field '" + field + "': unknown generator '" + s + "'");
}

Recipe parse_recipe(const std::string& s, const std::string& field) {
  static const std::pair<const char*, Recipe> table[] = {
      {"one_dnn", Recipe::one_dnn},         {"rd", Recipe::rd},
      {"lgv", Recipe::lgv},                 {"lgv_swa", Recipe::lgv_swa},
      {"lgv_swa_rd", Recipe::lgv_swa_rd},   {"subspace_rd", Recipe::subspace_rd},
      {"projected", Recipe::projected},     {"shifted", Recipe::shifted}};
  for (const auto& [name, r] : table) {
    if (s == name) return r;
  }
  throw ConfigError("config field '" + field + "': unknown recipe '" + s + "'");
}

std::string default_recipe_name(const RecipeConfig& r) {
  switch (r.recipe) {
    case Recipe::projected:
      return "projected_c" + std::to_string(r.c);
    case Recipe::shifted:
      return std::string("shifted_") + (r.center_swa ? "swa" : "dnn") + "_g" + fmt_real(r.gamma);
    default:
      return to_string(r.recipe);
  }
}

DatasetConfig parse_dataset(const json& j) {
  DatasetConfig d;
  Reader r(j, "dataset");
  std::string gen = "blobs";
  r.get("generator", gen);
  d.generator = parse_generator(gen, "dataset.generator");
  r.get("classes", d.classes);
  r.get("dim", d.dim);
  r.get("train_per_class", d.per_class.train);
  r.get("val_per_class", d.per_class.val);
  r.get("test_per_class", d.per_class.test);
  r.get("spread", d.spread);
  r.get("noise", d.noise);
  r.get("seed", d.seed);
  std::vector<double> box{d.box.lo, d.box.hi};
  r.get("box", box);
  require(box.size() == 2 && box[0] < box[1], "dataset.box", "must be [lo, hi] with lo < hi");
  d.box = {box[0], box[1]};
  r.get("train_images", d.train_images);
  r.get("train_labels", d.train_labels);
  r.get("test_images", d.test_images);
  r.get("test_labels", d.test_labels);
  r.get("val_count", d.val_count);
  r.finish();
  require(d.classes >= 2, "dataset.classes", "must be at least 2");
  require(d.dim >= 1, "dataset.dim", "must be positive");
  if (d.generator == Generator::idx_file) {
    require(!d.train_images.empty() && !d.train_labels.empty() && !d.test_images.empty() &&
                !d.test_labels.empty(),
            "dataset", "with generator idx_file needs train_images, train_labels, test_images and test_labels");
  }
  return d;
}

RecipeConfig parse_recipe_config(const json& j, const std::string& path) {
  RecipeConfig rc;
  if (j.is_string()) {
    rc.recipe = parse_recipe(j.get<std::string>(), path);
    rc.name = default_recipe_name(rc);
    return rc;
  }
  Reader r(j, path);
  std::string recipe;
  r.get("recipe", recipe);
  require(!recipe.empty(), path + ".recipe", "is required");
  rc.recipe = parse_recipe(recipe, path + ".recipe");
  if (r.has("sigma")) {
    const json& s = r.raw("sigma");
    if (s.is_string()) {
      require(s.get<std::string>() == "match", path + ".sigma", "must be a number or \"match\"");
      rc.sigma_match = true;
    } else {
      r.get("sigma", rc.sigma);
      require(*rc.sigma >= 0.0, path + ".sigma", "must be non-negative");
    }
  } else {
    r.mark("sigma");
  }
  r.get("C", rc.c);
  r.get("gamma", rc.gamma);
  std::string center = "dnn";
  r.get("center", center);
  require(center == "dnn" || center == "swa", path + ".center", "must be \"dnn\" or \"swa\"");
  rc.center_swa = center == "swa";
  r.get("k", rc.k);
  r.get("name", rc.name);
  r.finish();
  if (rc.name.empty()) rc.name = default_recipe_name(rc);
  return rc;
}

json recipe_to_json(const RecipeConfig& rc) {
  json j{{"name", rc.name}, {"recipe", to_string(rc.recipe)}};
  if (rc.sigma_match) j["sigma"] = "match";
  else if (rc.sigma) j["sigma"] = *rc.sigma;
  if (rc.recipe == Recipe::projected) j["C"] = rc.c;
  if (rc.recipe == Recipe::shifted) {
    j["gamma"] = rc.gamma;
    j["center"] = rc.center_swa ? "swa" : "dnn";
  }
  if (rc.k) j["k"] = *rc.k;
  return j;
}

}  // namespace

std::string to_string(Recipe r) {
  switch (r) {
    case Recipe::one_dnn: return "one_dnn";
    case Recipe::rd: return "rd";
    case Recipe::lgv: return "lgv";
    case Recipe::lgv_swa: return "lgv_swa";
    case Recipe::lgv_swa_rd: return "lgv_swa_rd";
    case Recipe::subspace_rd: return "subspace_rd";
    case Recipe::projected: return "projected";
    case Recipe::shifted: return "shifted";
  }
  return "?";
}

TrainConfig RunConfig::train_config(std::uint64_t seed) const {
  TrainConfig tc;
  tc.epochs = training.epochs;
  tc.schedule = training.step_decay
                    ? LrSchedule::step_decay(training.lr, training.decay_factor, training.decay_every)
                    : LrSchedule::constant(training.lr);
  tc.momentum = training.momentum;
  tc.batch_size = training.batch_size;
  tc.weight_decay = training.weight_decay;
  tc.seed = seed;
  return tc;
}

LgvConfig RunConfig::lgv_config(std::uint64_t seed) const {
  LgvConfig lc;
  lc.n_epochs = lgv.n_epochs;
  lc.n_weights = lgv.n_weights;
  lc.lr = lgv.lr.value_or(0.5 * training.lr);
  lc.momentum = lgv.momentum.value_or(training.momentum);
  lc.batch_size = lgv.batch_size.value_or(training.batch_size);
  lc.weight_decay = lgv.weight_decay.value_or(training.weight_decay);
  lc.seed = seed;
  return lc;
}

bool RunConfig::needs_prime() const {
  for (const auto& s : surrogates) {
    if (s.recipe == Recipe::shifted || s.sigma_match) return true;
  }
  return false;
}

RunConfig parse_config(const json& j) {
  RunConfig cfg;
  Reader r(j, "");
  if (r.has("dataset")) cfg.dataset = parse_dataset(r.raw("dataset"));
  else r.mark("dataset");

  if (r.has("model")) {
    Reader m(r.raw("model"), "model");
    m.get("layer_widths", cfg.layer_widths);
    std::string act = to_string(cfg.activation);
    m.get("activation", act);
    try {
      cfg.activation = parse_activation(act);
    } catch (const Error&) {
      throw ConfigError("config field 'model.activation': unknown activation '" + act + "'");
    }
    m.finish();
  } else {
    r.mark("model");
  }
  require(cfg.layer_widths.size() >= 2, "model.layer_widths", "needs at least input and output widths");
  require(cfg.layer_widths.front() == static_cast<std::size_t>(cfg.dataset.dim) ||
              cfg.dataset.generator != Generator::blobs,
          "model.layer_widths", "must start with dataset.dim");
  require(cfg.layer_widths.back() == static_cast<std::size_t>(cfg.dataset.classes),
          "model.layer_widths", "must end with dataset.classes");

  if (r.has("training")) {
    Reader t(r.raw("training"), "training");
    t.get("epochs", cfg.training.epochs);
    t.get("lr", cfg.training.lr);
    std::string sched = cfg.training.step_decay ? "step_decay" : "constant";
    t.get("schedule", sched);
    require(sched == "step_decay" || sched == "constant", "training.schedule",
            "must be \"step_decay\" or \"constant\"");
    cfg.training.step_decay = sched == "step_decay";
    t.get("decay_factor", cfg.training.decay_factor);
    t.get("decay_every", cfg.training.decay_every);
    t.get("momentum", cfg.training.momentum);
    t.get("batch_size", cfg.training.batch_size);
    t.get("weight_decay", cfg.training.weight_decay);
    t.finish();
  } else {
    r.mark("training");
  }
  try {
    cfg.train_config(0).validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("invalid training block: ") + e.what());
  }

  if (r.has("lgv")) {
    Reader l(r.raw("lgv"), "lgv");
    l.get("n_epochs", cfg.lgv.n_epochs);
    l.get("n_weights", cfg.lgv.n_weights);
    l.get("lr", cfg.lgv.lr);
    l.get("momentum", cfg.lgv.momentum);
    l.get("batch_size", cfg.lgv.batch_size);
    l.get("weight_decay", cfg.lgv.weight_decay);
    l.finish();
  } else {
    r.mark("lgv");
  }
  require(cfg.lgv.n_epochs > 0, "lgv.n_epochs", "must be positive");
  require(cfg.lgv.n_weights > 0, "lgv.n_weights", "must be positive");
  require(!cfg.lgv.lr || *cfg.lgv.lr >= 0.0, "lgv.lr", "must be non-negative");

  if (r.has("surrogates")) {
    const json& s = r.raw("surrogates");
    require(s.is_array() && !s.empty(), "surrogates", "must be a non-empty list");
    for (std::size_t i = 0; i < s.size(); ++i) {
      cfg.surrogates.push_back(parse_recipe_config(s[i], "surrogates[" + std::to_string(i) + "]"));
    }
  } else {
    r.mark("surrogates");
    for (Recipe rec : {Recipe::one_dnn, Recipe::lgv, Recipe::lgv_swa}) {
      RecipeConfig rc;
      rc.recipe = rec;
      rc.name = default_recipe_name(rc);
      cfg.surrogates.push_back(rc);
    }
  }
  std::set<std::string> names;
  for (const auto& s : cfg.surrogates) {
    require(names.insert(s.name).second, "surrogates", "has duplicate name '" + s.name + "'");
  }

  std::optional<double> alpha;
  double eps = 0.25;
  std::string norm = "l2";
  if (r.has("attack")) {
    Reader a(r.raw("attack"), "attack");
    a.get("norm", norm);
    a.get("epsilon", eps);
    a.get("alpha", alpha);
    a.get("n_iter", cfg.attack.n_iter);
    a.get("momentum", cfg.attack.momentum);
    a.get("feature_noise_sigma", cfg.attack.feature_noise_sigma);
    std::string step = "normalized";
    a.get("step", step);
    require(step == "normalized" || step == "raw", "attack.step", "must be \"normalized\" or \"raw\"");
    cfg.attack.step = step == "raw" ? StepMode::raw : StepMode::normalized;
    a.get("n_examples", cfg.n_examples);
    a.finish();
  } else {
    r.mark("attack");
  }
  {
    const std::size_t n_iter = cfg.attack.n_iter;
    const double mom = cfg.attack.momentum, noise = cfg.attack.feature_noise_sigma;
    const StepMode step = cfg.attack.step;
    try {
      cfg.attack = AttackConfig::with_defaults(parse_norm(norm), eps);
    } catch (const Error&) {
      throw ConfigError("config field 'attack.norm': unknown norm '" + norm + "'");
    }
    if (alpha) cfg.attack.alpha = *alpha;
    cfg.attack.n_iter = n_iter;
    cfg.attack.momentum = mom;
    cfg.attack.feature_noise_sigma = noise;
    cfg.attack.step = step;
    cfg.attack.box = cfg.dataset.box;
    try {
      cfg.attack.validate();
    } catch (const InvalidArgument& e) {
      throw ConfigError(std::string("invalid attack block: ") + e.what());
    }
  }
  require(cfg.n_examples > 0, "attack.n_examples", "must be positive");

  if (r.has("targets")) {
    const json& t = r.raw("targets");
    require(t.is_array() && !t.empty(), "targets", "must be a non-empty list");
    for (std::size_t i = 0; i < t.size(); ++i) {
      Reader tr(t[i], "targets[" + std::to_string(i) + "]");
      TargetConfig tc;
      tr.get("name", tc.name);
      require(tr.has("seed"), tr.where("seed"), "is required");
      tr.get("seed", tc.seed);
      tr.finish();
      if (tc.name.empty()) tc.name = "target_" + std::to_string(i);
      cfg.targets.push_back(tc);
    }
  } else {
    r.mark("targets");
    for (std::uint64_t i = 0; i < 3; ++i) cfg.targets.push_back({"target_" + std::to_string(i), 1000 + i});
  }
  names.clear();
  for (const auto& t : cfg.targets) {
    require(names.insert(t.name).second, "targets", "has duplicate name '" + t.name + "'");
  }

  r.get("seeds", cfg.seeds);
  require(!cfg.seeds.empty(), "seeds", "must be non-empty");
  r.get("prime_seed_offset", cfg.prime_seed_offset);

  if (r.has("geometry")) {
    Reader g(r.raw("geometry"), "geometry");
    auto& G = cfg.geometry;
    g.get("ray_alphas", G.ray_alphas);
    g.get("n_directions", G.n_directions);
    g.get("direction_seed", G.direction_seed);
    g.get("interp_alphas", G.interp_alphas);
    g.get("max_iters", G.max_iters);
    g.get("tol", G.tol);
    g.get("n_probes", G.n_probes);
    g.get("lgv_members", G.lgv_members);
    g.get("disk_examples", G.disk_examples);
    g.get("grid_n", G.grid_n);
    g.get("adversarial_target", G.adversarial_target);
    g.get("quadratic_dim", G.quadratic_dim);
    g.finish();
    require(G.grid_n >= 3, "geometry.grid_n", "must be at least 3");
    require(G.n_probes > 0, "geometry.n_probes", "must be positive");
    require(G.lgv_members > 0, "geometry.lgv_members", "must be positive");
    if (!G.adversarial_target.empty()) {
      bool found = false;
      for (const auto& t : cfg.targets) found = found || t.name == G.adversarial_target;
      require(found, "geometry.adversarial_target", "names no target '" + G.adversarial_target + "'");
    }
  } else {
    r.mark("geometry");
  }

  r.get("output_dir", cfg.output_dir);
  require(!cfg.output_dir.empty(), "output_dir", "must be non-empty");
  r.finish();
  return cfg;
}

json config_to_json(const RunConfig& cfg) {
  const auto& d = cfg.dataset;
  json dataset{{"generator", to_string(d.generator)},
               {"classes", d.classes},
               {"dim", d.dim},
               {"train_per_class", d.per_class.train},
               {"val_per_class", d.per_class.val},
               {"test_per_class", d.per_class.test},
               {"spread", d.spread},
               {"noise", d.noise},
               {"seed", d.seed},
               {"box", {d.box.lo, d.box.hi}}};
  if (d.generator == Generator::idx_file) {
    dataset["train_images"] = d.train_images;
    dataset["train_labels"] = d.train_labels;
    dataset["test_images"] = d.test_images;
    dataset["test_labels"] = d.test_labels;
    dataset["val_count"] = d.val_count;
  }
  const auto& t = cfg.training;
  const LgvConfig lc = cfg.lgv_config(0);
  json surrogates = json::array();
  for (const auto& s : cfg.surrogates) surrogates.push_back(recipe_to_json(s));
  json targets = json::array();
  for (const auto& tg : cfg.targets) targets.push_back({{"name", tg.name}, {"seed", tg.seed}});
  const auto& a = cfg.attack;
  const auto& g = cfg.geometry;
  return json{
      {"dataset", dataset},
      {"model", {{"layer_widths", cfg.layer_widths}, {"activation", to_string(cfg.activation)}}},
      {"training",
       {{"epochs", t.epochs},
        {"lr", t.lr},
        {"schedule", t.step_decay ? "step_decay" : "constant"},
        {"decay_factor", t.decay_factor},
        {"decay_every", t.decay_every},
        {"momentum", t.momentum},
        {"batch_size", t.batch_size},
        {"weight_decay", t.weight_decay}}},
      {"lgv",
       {{"n_epochs", lc.n_epochs},
        {"n_weights", lc.n_weights},
        {"lr", lc.lr},
        {"momentum", lc.momentum},
        {"batch_size", lc.batch_size},
        {"weight_decay", lc.weight_decay}}},
      {"surrogates", surrogates},
      {"attack",
       {{"norm", to_string(a.norm)},
        {"epsilon", a.epsilon},
        {"alpha", a.alpha},
        {"n_iter", a.n_iter},
        {"momentum", a.momentum},
        {"feature_noise_sigma", a.feature_noise_sigma},
        {"step", a.step == StepMode::raw ? "raw" : "normalized"},
        {"n_examples", cfg.n_examples}}},
      {"targets", targets},
      {"seeds", cfg.seeds},
      {"prime_seed_offset", cfg.prime_seed_offset},
      {"geometry",
       {{"ray_alphas", g.ray_alphas},
        {"n_directions", g.n_directions},
        {"direction_seed", g.direction_seed},
        {"interp_alphas", g.interp_alphas},
        {"max_iters", g.max_iters},
        {"tol", g.tol},
        {"n_probes", g.n_probes},
        {"lgv_members", g.lgv_members},
        {"disk_examples", g.disk_examples},
        {"grid_n", g.grid_n},
        {"adversarial_target", g.adversarial_target},
        {"quadratic_dim", g.quadratic_dim}}},
      {"output_dir", cfg.output_dir}};
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' must look like path.to.field=value");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ConfigError("override path '" + path + "' has an empty segment");
    if (!node->is_object()) {
      if (!node->is_null()) throw ConfigError("override path '" + path + "' descends into a non-object");
      *node = json::object();
    }
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

std::string config_hash(const RunConfig& cfg) {
  json j = config_to_json(cfg);
  j.erase("output_dir");
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(j.dump())));
  return buf;
}

std::filesystem::path output_root(const RunConfig& cfg) {
  std::filesystem::path p(cfg.output_dir);
  if (p.is_relative()) {
    if (const char* root = std::getenv("LGV_OUTPUT_ROOT"); root && *root) p = std::filesystem::path(root) / p;
  }
  return p;
}

Dataset build_dataset(const DatasetConfig& d) {
  switch (d.generator) {
    case Generator::blobs:
      return make_blobs(d.classes, d.dim, d.per_class, d.spread, d.seed, d.box);
    case Generator::spirals:
      return make_spirals(d.classes, d.per_class, d.noise, d.seed, d.box);
    case Generator::idx_file: {
      Dataset ds;
      ds.generator = Generator::idx_file;
      ds.seed = d.seed;
      ds.num_classes = static_cast<std::size_t>(d.classes);
      ds.box = {0.0, 1.0};
      Batch all = load_idx(d.train_images, d.train_labels);
      if (d.val_count >= all.size()) {
        throw ConfigError("config field 'dataset.val_count' must be below the IDX training size " +
                          std::to_string(all.size()));
      }
      std::vector<std::size_t> tr, va;
      for (std::size_t i = 0; i < all.size(); ++i) (i < all.size() - d.val_count ? tr : va).push_back(i);
      ds.train = all.rows(tr);
      ds.val = all.rows(va);
      ds.test = load_idx(d.test_images, d.test_labels);
      return ds;
    }
  }
  throw ConfigError("unknown generator");
}

SweepParam parse_sweep_param(const std::string& name) {
  if (name == "lr") return SweepParam::lr;
  if (name == "epochs") return SweepParam::epochs;
  if (name == "weights_per_epoch") return SweepParam::weights_per_epoch;
  if (name == "iterations") return SweepParam::iterations;
  if (name == "sigma") return SweepParam::sigma;
  if (name == "gamma") return SweepParam::gamma;
  if (name == "C" || name == "c") return SweepParam::c;
  throw ConfigError("unknown sweep parameter '" + name + "'");
}

std::string to_string(SweepParam p) {
  switch (p) {
    case SweepParam::lr: return "lr";
    case SweepParam::epochs: return "epochs";
    case SweepParam::weights_per_epoch: return "weights_per_epoch";
    case SweepParam::iterations: return "iterations";
    case SweepParam::sigma: return "sigma";
    case SweepParam::gamma: return "gamma";
    case SweepParam::c: return "C";
  }
  return "?";
}

GeometryProbe parse_probe(const std::string& name) {
  if (name == "rays") return GeometryProbe::rays;
  if (name == "interpolate") return GeometryProbe::interpolate;
  if (name == "hessian") return GeometryProbe::hessian;
  if (name == "disk") return GeometryProbe::disk;
  if (name == "pca") return GeometryProbe::pca;
  throw ConfigError("unknown geometry probe '" + name + "'");
}

}  // namespace lgv
