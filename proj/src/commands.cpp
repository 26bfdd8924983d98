#include "lgv/error.hpp"
#include "lgv/format.hpp"
#include "lgv/geometry.hpp"
#include "lgv/harness.hpp"
#include "lgv/rng.hpp"
#include "lgv/surrogates.hpp"
#include "lgv/weights_io.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <fstream>
#include <map>

namespace lgv {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Layout {
  fs::path root;

  fs::path seed_dir(std::uint64_t s) const { return root / ("seed_" + std::to_string(s)); }
  fs::path dnn(std::uint64_t s) const { return seed_dir(s) / "dnn.lgvw"; }
  fs::path lgv(std::uint64_t s) const { return seed_dir(s) / "lgv.lgvw"; }
  fs::path dnn_prime(std::uint64_t s) const { return seed_dir(s) / "dnn_prime.lgvw"; }
  fs::path lgv_prime(std::uint64_t s) const { return seed_dir(s) / "lgv_prime.lgvw"; }
  fs::path target(const std::string& name) const { return root / "targets" / (name + ".lgvw"); }
  fs::path geometry() const { return root / "geometry"; }
};

void make_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw IoError("cannot create directory " + p.string() + ": " + ec.message());
}

std::ofstream open_csv(const fs::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  return os;
}

std::string seed_list(const std::vector<std::uint64_t>& seeds) {
  std::string s;
  for (std::size_t i = 0; i < seeds.size(); ++i) s += (i ? ";" : "") + std::to_string(seeds[i]);
  return s;
}

std::string stamp(const RunConfig& cfg) {
  return "config_hash=" + config_hash(cfg) + " seeds=" + seed_list(cfg.seeds);
}

json artifact_meta(const RunConfig& cfg, const std::string& role, std::uint64_t seed) {
  return json{{"config_hash", config_hash(cfg)}, {"role", role}, {"seed", seed}};
}

WeightVector load_single(const fs::path& path, const ModelSpec& spec, const char* producer) {
  if (!fs::exists(path)) {
    throw IoError("missing " + path.string() + "; run `lgv " + producer + "` with this config first");
  }
  auto lc = load_collection(path);
  if (!(lc.spec == spec) || lc.collection.size() != 1) {
    throw IoError(path.string() + " does not hold a single model of the configured architecture");
  }
  return lc.collection[0];
}

WeightCollection load_many(const fs::path& path, const ModelSpec& spec) {
  if (!fs::exists(path)) {
    throw IoError("missing " + path.string() + "; run `lgv collect` with this config first");
  }
  auto lc = load_collection(path);
  if (!(lc.spec == spec)) throw IoError(path.string() + " was collected for a different architecture");
  return lc.collection;
}

void write_log_rows(std::ostream& os, const std::string& role, const std::string& name, std::uint64_t seed,
                    const std::vector<TrainLogRow>& log) {
  for (const auto& r : log) {
    os << role << ',' << name << ',' << seed << ',' << r.epoch << ',' << fmt_real(r.train_loss) << ','
       << fmt_real(r.val_accuracy) << '\n';
  }
}

double deviation_rms(const SubspaceBasis& b) {
  return std::sqrt(b.deviations.squaredNorm() / static_cast<double>(b.deviations.size()));
}

// Everything a recipe can draw on for one seed.
struct SeedModels {
  WeightVector dnn;
  WeightCollection lgv;
  WeightVector swa;
  SubspaceBasis basis;
  std::optional<SubspaceBasis> prime_basis;
};

SeedModels assemble(WeightVector dnn, WeightCollection lgv, const std::optional<WeightCollection>& lgv_prime) {
  SeedModels m;
  m.dnn = std::move(dnn);
  m.lgv = std::move(lgv);
  m.swa = swa(m.lgv);
  m.basis = build_subspace(m.lgv);
  if (lgv_prime) m.prime_basis = build_subspace(*lgv_prime);
  return m;
}

WeightCollection build_recipe(const RecipeConfig& rc, const SeedModels& m, std::uint64_t seed, std::size_t k_default) {
  const std::size_t k = rc.k.value_or(k_default);
  auto sigma = [&](double fallback) {
    if (!rc.sigma_match) return rc.sigma.value_or(fallback);
    if (!m.prime_basis) throw ConfigError("surrogate '" + rc.name + "' needs LGV' weights for sigma=match");
    return deviation_rms(*m.prime_basis);
  };
  switch (rc.recipe) {
    case Recipe::one_dnn:
      return WeightCollection::single(m.dnn, "one_dnn");
    case Recipe::rd:
      return rd_vicinity(m.dnn, sigma(5e-3), k, derive_seed(seed, "rd"));
    case Recipe::lgv:
      return m.lgv;
    case Recipe::lgv_swa:
      return WeightCollection::single(m.swa, "lgv_swa");
    case Recipe::lgv_swa_rd:
      return rd_vicinity(m.swa, sigma(1e-2), k, derive_seed(seed, "lgv_swa_rd"));
    case Recipe::subspace_rd:
      return sample_subspace(m.basis, k, derive_seed(seed, "subspace_rd"));
    case Recipe::projected:
      return project_top_c(m.basis, m.lgv, rc.c);
    case Recipe::shifted:
      if (!m.prime_basis) throw ConfigError("surrogate '" + rc.name + "' needs LGV' weights");
      return shift_deviations(rc.center_swa ? m.swa : m.dnn, *m.prime_basis, rc.gamma);
  }
  throw ConfigError("unknown recipe");
}

std::vector<NamedModel> load_targets(const RunConfig& cfg, const Layout& L, const ModelSpec& spec) {
  std::vector<NamedModel> out;
  for (const auto& t : cfg.targets) out.push_back({t.name, spec, load_single(L.target(t.name), spec, "train")});
  return out;
}

std::vector<Model> as_models(const std::vector<NamedModel>& targets) {
  std::vector<Model> m;
  for (const auto& t : targets) m.emplace_back(t.spec, t.weights);
  return m;
}

SeedModels load_seed(const RunConfig& cfg, const Layout& L, const ModelSpec& spec, std::uint64_t s) {
  std::optional<WeightCollection> prime;
  if (cfg.needs_prime()) prime = load_many(L.lgv_prime(s), spec);
  return assemble(load_single(L.dnn(s), spec, "train"), load_many(L.lgv(s), spec), prime);
}

// Evenly spaced snapshot indices: K/m - 1, 2K/m - 1, ...
std::vector<std::size_t> member_indices(std::size_t k, std::size_t m) {
  m = std::min(m, k);
  std::vector<std::size_t> idx;
  for (std::size_t i = 1; i <= m; ++i) idx.push_back(i * k / m - 1);
  return idx;
}

std::uint64_t direction_hash(const Eigen::VectorXd& d) { return content_hash(d); }

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::vector<fs::path> cmd_train(const RunConfig& cfg) {
  const Layout L{output_root(cfg)};
  const ModelSpec spec = cfg.spec();
  const Dataset ds = build_dataset(cfg.dataset);
  make_dir(L.root / "targets");
  std::vector<fs::path> written;

  const fs::path cfg_path = L.root / "config.json";
  {
    std::ofstream os(cfg_path, std::ios::trunc);
    if (!os) throw IoError("cannot write " + cfg_path.string());
    os << config_to_json(cfg).dump(2) << '\n';
  }
  written.push_back(cfg_path);

  const fs::path log_path = L.root / "train_log.csv";
  auto log_os = open_csv(log_path);
  log_os << "# " << stamp(cfg) << '\n' << "role,name,seed,epoch,train_loss,val_accuracy\n";

  auto fit = [&](const std::string& role, const std::string& name, std::uint64_t seed, const fs::path& path) {
    std::vector<TrainLogRow> log;
    const WeightVector w = train(spec, ds, cfg.train_config(seed), std::nullopt, &log);
    write_log_rows(log_os, role, name, seed, log);
    json extra = artifact_meta(cfg, role, seed);
    extra["name"] = name;
    save_collection(path, spec, WeightCollection::single(w, role), DType::f64, extra);
    written.push_back(path);
  };

  for (const auto& t : cfg.targets) fit("target", t.name, t.seed, L.target(t.name));
  for (auto s : cfg.seeds) {
    make_dir(L.seed_dir(s));
    fit("dnn", "dnn", s, L.dnn(s));
    if (cfg.needs_prime()) fit("dnn_prime", "dnn_prime", s + cfg.prime_seed_offset, L.dnn_prime(s));
  }
  written.push_back(log_path);
  return written;
}

std::vector<fs::path> cmd_collect(const RunConfig& cfg) {
  const Layout L{output_root(cfg)};
  const ModelSpec spec = cfg.spec();
  const Dataset ds = build_dataset(cfg.dataset);
  std::vector<fs::path> written;

  auto run = [&](const fs::path& base, const fs::path& out, std::uint64_t seed, const std::string& role) {
    const WeightVector w0 = load_single(base, spec, "train");
    const LgvConfig lc = cfg.lgv_config(seed);
    WeightCollection c = lc.lr == 0.0 ? WeightCollection::copies(w0, lc.n_weights, "lgv") : collect_lgv(spec, ds, w0, lc);
    json extra = artifact_meta(cfg, role, seed);
    extra["base"] = base.filename().string();
    extra["base_hash"] = hex(content_hash(w0.values));
    save_collection(out, spec, c, DType::f64, extra);
    written.push_back(out);
  };

  for (auto s : cfg.seeds) {
    run(L.dnn(s), L.lgv(s), s, "lgv");
    if (cfg.needs_prime()) run(L.dnn_prime(s), L.lgv_prime(s), s + cfg.prime_seed_offset, "lgv_prime");
  }
  return written;
}

std::vector<fs::path> cmd_attack(const RunConfig& cfg) {
  const Layout L{output_root(cfg)};
  const ModelSpec spec = cfg.spec();
  const Dataset ds = build_dataset(cfg.dataset);
  const auto targets = load_targets(cfg, L, spec);
  const auto models = as_models(targets);

  TransferReport report;
  for (auto s : cfg.seeds) {
    const SeedModels m = load_seed(cfg, L, spec, s);
    std::vector<NamedSurrogate> surrogates;
    for (const auto& rc : cfg.surrogates) {
      surrogates.push_back({rc.name, spec, build_recipe(rc, m, s, cfg.lgv.n_weights)});
    }
    const Batch b = select_correct(models, ds.test, cfg.n_examples, s);
    report.append(transfer_matrix(surrogates, targets, b, cfg.attack, {s}));
  }
  report.sort_canonical();

  const fs::path csv = L.root / "report.csv";
  const fs::path summary = L.root / "summary.csv";
  const fs::path js = L.root / "report.json";
  write_report_csv(csv, report, stamp(cfg));
  write_summary_csv(summary, report, stamp(cfg));
  json j = report_to_json(report);
  j["config_hash"] = config_hash(cfg);
  j["seeds"] = cfg.seeds;
  std::ofstream os(js, std::ios::trunc);
  if (!os) throw IoError("cannot write " + js.string());
  os << j.dump(2) << '\n';
  return {csv, summary, js};
}

std::vector<fs::path> cmd_geometry(const RunConfig& cfg, GeometryProbe probe) {
  const Layout L{output_root(cfg)};
  make_dir(L.geometry());
  const auto& G = cfg.geometry;
  std::vector<fs::path> written;

  if (probe == GeometryProbe::hessian && G.quadratic_dim > 0) {
    const fs::path path = L.geometry() / "hessian_quadratic.csv";
    auto os = open_csv(path);
    os << "# " << stamp(cfg) << '\n'
       << "seed,dim,max_eigenvalue,iterations,trace,trace_sem,oracle_max_eigenvalue,oracle_trace\n";
    for (auto s : cfg.seeds) {
      Rng rng = make_rng(derive_seed(s, "quadratic"));
      std::normal_distribution<double> n01;
      const auto d = static_cast<Eigen::Index>(G.quadratic_dim);
      Eigen::MatrixXd m(d, d);
      for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) m(i, j) = n01(rng);
      const Eigen::MatrixXd a = m.transpose() * m / static_cast<double>(d);
      const Objective obj = quadratic_objective(a);
      const Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
      const auto eig = hessian_max_eigenvalue(obj, w, G.max_iters, G.tol, s);
      const auto tr = hessian_trace(obj, w, G.n_probes, s);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::EigenvaluesOnly);
      os << s << ',' << d << ',' << fmt_real(eig.value) << ',' << eig.iterations << ',' << fmt_real(tr.value) << ','
         << fmt_real(tr.sem) << ',' << fmt_real(es.eigenvalues().maxCoeff()) << ',' << fmt_real(a.trace()) << '\n';
    }
    written.push_back(path);
    return written;
  }

  const ModelSpec spec = cfg.spec();
  const Dataset ds = build_dataset(cfg.dataset);

  std::optional<AdversarialLoss> adv;
  std::vector<NamedModel> targets;
  if (probe == GeometryProbe::disk || !G.adversarial_target.empty()) targets = load_targets(cfg, L, spec);
  if (!G.adversarial_target.empty()) {
    for (const auto& t : targets) {
      if (t.name == G.adversarial_target) adv = AdversarialLoss{t, cfg.attack};
    }
  }
  // Adversarial-mode probes attack examples every target classifies correctly.
  auto probe_batch = [&](std::uint64_t s) {
    if (!adv) return ds.train;
    return select_correct(as_models(targets), ds.test, cfg.n_examples, s);
  };

  switch (probe) {
    case GeometryProbe::rays: {
      std::vector<std::pair<std::string, RayProbe>> rays;
      const fs::path dir_path = L.geometry() / "ray_directions.csv";
      auto dos = open_csv(dir_path);
      dos << "# " << stamp(cfg) << '\n' << "probe,seed,direction_seed,direction_hash\n";
      for (auto s : cfg.seeds) {
        const SeedModels m = load_seed(cfg, L, spec, s);
        const Batch b = probe_batch(s);
        std::vector<std::pair<std::string, const WeightVector*>> origins{{"dnn", &m.dnn}};
        for (auto k : member_indices(m.lgv.size(), G.lgv_members)) {
          origins.emplace_back("lgv" + std::to_string(k), &m.lgv.weights[k]);
        }
        origins.emplace_back("lgv_swa", &m.swa);
        for (std::size_t r = 0; r < G.n_directions; ++r) {
          const std::uint64_t dseed = G.direction_seed + r;
          for (const auto& [name, w] : origins) {
            const std::string id = "s" + std::to_string(s) + "_" + name + "_d" + std::to_string(r);
            RayProbe ray = ray_losses(spec, *w, dseed, G.ray_alphas, b, adv);
            dos << id << ',' << s << ',' << dseed << ',' << hex(direction_hash(ray.direction)) << '\n';
            rays.emplace_back(id, std::move(ray));
          }
        }
      }
      const fs::path path = L.geometry() / "rays.csv";
      write_ray_csv(path, rays, stamp(cfg));
      written.push_back(path);
      written.push_back(dir_path);
      break;
    }
    case GeometryProbe::interpolate: {
      std::vector<std::pair<std::string, RayProbe>> paths;
      for (auto s : cfg.seeds) {
        const SeedModels m = load_seed(cfg, L, spec, s);
        // alpha = 1 is LGV-SWA, alpha = 0 the initial DNN.
        paths.emplace_back("s" + std::to_string(s) + "_lgv_swa_dnn",
                           interpolate(spec, m.swa, m.dnn, G.interp_alphas, probe_batch(s), adv));
      }
      const fs::path path = L.geometry() / "interpolate.csv";
      write_ray_csv(path, paths, stamp(cfg));
      written.push_back(path);
      break;
    }
    case GeometryProbe::hessian: {
      const fs::path path = L.geometry() / "hessian.csv";
      auto os = open_csv(path);
      os << "# " << stamp(cfg) << '\n' << "seed,model,max_eigenvalue,iterations,trace,trace_sem\n";
      for (auto s : cfg.seeds) {
        const SeedModels m = load_seed(cfg, L, spec, s);
        auto row = [&](const std::string& name, const WeightVector& w) {
          const auto eig = hessian_max_eigenvalue(spec, w, ds.train, G.max_iters, G.tol, s);
          const auto tr = hessian_trace(spec, w, ds.train, G.n_probes, s);
          os << s << ',' << name << ',' << fmt_real(eig.value) << ',' << eig.iterations << ',' << fmt_real(tr.value)
             << ',' << fmt_real(tr.sem) << '\n';
        };
        row("dnn", m.dnn);
        for (auto k : member_indices(m.lgv.size(), G.lgv_members)) row("lgv" + std::to_string(k), m.lgv[k]);
        row("lgv_swa", m.swa);
      }
      written.push_back(path);
      break;
    }
    case GeometryProbe::disk: {
      std::vector<std::pair<std::string, PlaneMap>> maps;
      const auto models = as_models(targets);
      for (auto s : cfg.seeds) {
        const SeedModels m = load_seed(cfg, L, spec, s);
        const Batch b = select_correct(models, ds.test, G.disk_examples, s);
        AttackConfig ac = cfg.attack;
        ac.seed = s;
        const Eigen::MatrixXd adv_lgv = ifgsm(spec, m.lgv, b, ac);
        const Eigen::MatrixXd adv_dnn = ifgsm(spec, WeightCollection::single(m.dnn), b, ac);
        for (std::size_t i = 0; i < b.size(); ++i) {
          const Eigen::VectorXd x = b.inputs.row(static_cast<Eigen::Index>(i)).transpose();
          const PlaneBasis pb = plane_basis(x, adv_lgv.row(static_cast<Eigen::Index>(i)).transpose(),
                                            adv_dnn.row(static_cast<Eigen::Index>(i)).transpose());
          const std::string id = "s" + std::to_string(s) + "_ex" + std::to_string(i) + "_";
          const int y = b.labels[i];
          maps.emplace_back(id + "lgv", disk_loss_map(spec, m.lgv, x, y, pb, ac.epsilon, G.grid_n, ac.box));
          maps.emplace_back(id + "dnn", disk_loss_map(spec, WeightCollection::single(m.dnn), x, y, pb, ac.epsilon,
                                                      G.grid_n, ac.box));
          for (const auto& t : targets) {
            maps.emplace_back(id + t.name, disk_loss_map(t.spec, WeightCollection::single(t.weights), x, y, pb,
                                                         ac.epsilon, G.grid_n, ac.box));
          }
        }
      }
      const fs::path path = L.geometry() / "disk.csv";
      write_plane_csv(path, maps, stamp(cfg));
      written.push_back(path);
      break;
    }
    case GeometryProbe::pca: {
      const fs::path path = L.geometry() / "pca.csv";
      auto os = open_csv(path);
      os << "# " << stamp(cfg) << '\n' << "seed,component,singular_value,explained_ratio,cumulative_ratio\n";
      for (auto s : cfg.seeds) {
        const auto lgv = load_many(L.lgv(s), spec);
        const SubspaceBasis basis = build_subspace(lgv);
        for (Eigen::Index i = 0; i < basis.singular_values.size(); ++i) {
          os << s << ',' << i + 1 << ',' << fmt_real(basis.singular_values(i)) << ','
             << fmt_real(basis.explained_ratio.size() ? basis.explained_ratio(i) : 0.0) << ','
             << fmt_real(basis.cumulative_ratio(static_cast<std::size_t>(i + 1))) << '\n';
        }
        const fs::path bpath = L.geometry() / ("basis_s" + std::to_string(s) + ".lgvw");
        save_basis(bpath, spec, basis);
        written.push_back(bpath);
      }
      written.insert(written.begin(), path);
      break;
    }
  }
  return written;
}

std::vector<fs::path> cmd_sweep(const RunConfig& cfg, SweepParam param, const std::vector<double>& values) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  const bool integral = param == SweepParam::epochs || param == SweepParam::weights_per_epoch ||
                        param == SweepParam::iterations || param == SweepParam::c;
  for (double v : values) {
    if (!std::isfinite(v) || v < 0.0) throw ConfigError("sweep values must be finite and non-negative");
    if (integral && (v != std::floor(v) || (v == 0.0 && param != SweepParam::c))) {
      throw ConfigError("sweep over " + to_string(param) + " needs positive integer values");
    }
  }

  const Layout L{output_root(cfg)};
  make_dir(L.root);
  const ModelSpec spec = cfg.spec();
  const Dataset ds = build_dataset(cfg.dataset);

  std::vector<NamedModel> targets;
  for (const auto& t : cfg.targets) targets.push_back({t.name, spec, train(spec, ds, cfg.train_config(t.seed))});
  const auto models = as_models(targets);

  const bool lgv_varies =
      param == SweepParam::lr || param == SweepParam::epochs || param == SweepParam::weights_per_epoch;
  const bool prime = param == SweepParam::gamma;
  const double wpe = static_cast<double>(cfg.lgv.n_weights) / static_cast<double>(cfg.lgv.n_epochs);

  RecipeConfig shift_recipe;
  shift_recipe.recipe = Recipe::shifted;
  for (const auto& s : cfg.surrogates) {
    if (s.recipe == Recipe::shifted) shift_recipe = s;
  }

  struct Cell {
    double value;
    std::string target;
    std::uint64_t seed;
    double rate;
    std::size_t n;
  };
  std::vector<Cell> cells;

  for (auto s : cfg.seeds) {
    const WeightVector w0 = train(spec, ds, cfg.train_config(s));
    std::optional<WeightCollection> lgv_prime;
    if (prime) {
      const WeightVector w0p = train(spec, ds, cfg.train_config(s + cfg.prime_seed_offset));
      lgv_prime = collect_lgv(spec, ds, w0p, cfg.lgv_config(s + cfg.prime_seed_offset));
    }
    std::optional<SeedModels> fixed;
    if (!lgv_varies) fixed = assemble(w0, collect_lgv(spec, ds, w0, cfg.lgv_config(s)), lgv_prime);
    const Batch b = select_correct(models, ds.val, cfg.n_examples, s);

    for (double v : values) {
      AttackConfig ac = cfg.attack;
      WeightCollection surrogate;
      if (lgv_varies) {
        LgvConfig lc = cfg.lgv_config(s);
        if (param == SweepParam::lr) lc.lr = v;
        if (param == SweepParam::epochs) {
          lc.n_epochs = static_cast<std::size_t>(v);
          lc.n_weights = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(wpe * v)));
        }
        if (param == SweepParam::weights_per_epoch) {
          lc.n_weights = static_cast<std::size_t>(v) * lc.n_epochs;
        }
        // lr = 0 never leaves w0: the collection is K copies of the initial DNN.
        surrogate = lc.lr == 0.0 ? WeightCollection::copies(w0, lc.n_weights, "lgv") : collect_lgv(spec, ds, w0, lc);
      } else {
        RecipeConfig rc;
        switch (param) {
          case SweepParam::iterations:
            ac.n_iter = static_cast<std::size_t>(v);
            rc.recipe = Recipe::lgv;
            break;
          case SweepParam::sigma:
            rc.recipe = Recipe::lgv_swa_rd;
            rc.sigma = v;
            break;
          case SweepParam::gamma:
            rc = shift_recipe;
            rc.gamma = v;
            break;
          case SweepParam::c:
            rc.recipe = Recipe::projected;
            rc.c = static_cast<std::size_t>(v);
            break;
          default:
            break;
        }
        rc.name = to_string(param);
        surrogate = build_recipe(rc, *fixed, s, cfg.lgv.n_weights);
      }
      ac.seed = s;
      const Eigen::MatrixXd x_adv = ifgsm(spec, surrogate, b, ac);
      const TransferReport rep = evaluate(targets, x_adv, b, to_string(param), ac);
      for (const auto& row : rep.rows) cells.push_back({v, row.target, s, row.success_rate, row.n});
    }
  }

  const std::string name = to_string(param);
  const fs::path path = L.root / ("sweep_" + name + ".csv");
  const fs::path summary = L.root / ("sweep_" + name + "_summary.csv");
  {
    auto os = open_csv(path);
    os << "# " << stamp(cfg) << '\n' << "parameter,value,target,seed,success_rate,n\n";
    for (double v : values) {
      for (const auto& t : targets) {
        for (auto s : cfg.seeds) {
          for (const auto& c : cells) {
            if (c.value == v && c.target == t.name && c.seed == s) {
              os << name << ',' << fmt_real(v) << ',' << t.name << ',' << s << ',' << fmt_real(c.rate) << ','
                 << c.n << '\n';
              break;
            }
          }
        }
      }
    }
  }
  {
    auto os = open_csv(summary);
    os << "# " << stamp(cfg) << '\n' << "value,target,mean,sd\n";
    for (double v : values) {
      for (const auto& t : targets) {
        std::vector<double> r;
        for (auto s : cfg.seeds) {
          for (const auto& c : cells) {
            if (c.value == v && c.target == t.name && c.seed == s) {
              r.push_back(c.rate);
              break;
            }
          }
        }
        double mean = 0.0;
        for (double x : r) mean += x;
        mean /= static_cast<double>(r.size());
        double ss = 0.0;
        for (double x : r) ss += (x - mean) * (x - mean);
        const double sd = r.size() > 1 ? std::sqrt(ss / static_cast<double>(r.size() - 1)) : 0.0;
        os << fmt_real(v) << ',' << t.name << ',' << fmt_real(mean) << ',' << fmt_real(sd) << '\n';
      }
    }
  }
  return {path, summary};
}

}  // namespace lgv
