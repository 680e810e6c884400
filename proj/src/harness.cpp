#include "stamina/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cfenv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;

namespace stamina {

static Mat gaussian_rows(long rows, long cols, double stddev, CounterRng& rng) {
    Mat m(rows, cols);
    for (long i = 0; i < rows; ++i)
        for (long j = 0; j < cols; ++j) m(i, j) = stddev * rng.gaussian();
    return m;
}

GeneratedTasks generate_concepts(const ConceptGenerator& gen, int n_tasks,
                                 const Embedder& embedder, int steps, int batch_size) {
    if (n_tasks < 1) throw ConfigError("generate_concepts: need at least one task");
    if (!(gen.noise_scale > 0.0))
        throw ConfigError("generate_concepts: noise scale must be > 0");
    GeneratedTasks out;
    for (int t = 1; t <= n_tasks; ++t) {
        CounterRng rng(gen.seed, stream_id(0xC0CE, static_cast<std::uint64_t>(t)));
        ConceptBatch batch;
        TaskSpec spec;
        spec.task_id = t;
        spec.concept_seed = CounterRng::hash(gen.seed, 0xC0CE, t);
        spec.steps = steps;
        spec.batch_size = batch_size;
        spec.mode = gen.mode;
        if (gen.mode == Mode::denoiser) {
            Vec dir(gen.data_dim);
            for (long j = 0; j < gen.data_dim; ++j) dir(j) = rng.gaussian();
            Vec center = gen.center_radius * dir / dir.norm();
            batch.center = center;
            auto sample = [&](int n) {
                Mat s = gaussian_rows(n, gen.data_dim, gen.noise_scale, rng);
                s.rowwise() += center.transpose();
                return s;
            };
            batch.train = sample(gen.samples_per_concept);
            batch.eval = sample(gen.eval_samples);
            out.dataset_embeds.push_back(embedder.embed(batch.eval));
        } else {
            // classes_per_task fresh classes; labels are global class ids
            int n_per_class = std::max(2, gen.samples_per_concept / gen.classes_per_task);
            int n_eval_per_class = std::max(2, gen.eval_samples / gen.classes_per_task);
            for (int c = 0; c < gen.classes_per_task; ++c) {
                int label = (t - 1) * gen.classes_per_task + c;
                Vec dir(gen.data_dim);
                for (long j = 0; j < gen.data_dim; ++j) dir(j) = rng.gaussian();
                Vec center = gen.center_radius * dir / dir.norm();
                auto sample_seq = [&] {
                    Mat s = gaussian_rows(gen.seq_len, gen.data_dim, gen.noise_scale, rng);
                    s.rowwise() += center.transpose();
                    return s;
                };
                for (int i = 0; i < n_per_class; ++i) {
                    batch.train_seqs.push_back(sample_seq());
                    batch.train_labels.push_back(label);
                }
                for (int i = 0; i < n_eval_per_class; ++i) {
                    batch.eval_seqs.push_back(sample_seq());
                    batch.eval_labels.push_back(label);
                }
            }
        }
        out.specs.push_back(spec);
        out.batches.push_back(std::move(batch));
    }
    return out;
}

Embedder ExperimentConfig::make_embedder() const {
    if (embedder_kind == "identity") return Embedder::make_identity();
    if (embedder_kind == "random_projection")
        return Embedder::make_random_projection(gen.data_dim, d_embed, seed);
    throw ConfigError("unknown embedder kind: " + embedder_kind);
}

static std::string canonical_config_string(const ExperimentConfig& c) {
    std::ostringstream s;
    s << "mode=" << to_string(c.mode) << ";n_tasks=" << c.n_tasks << ";steps=" << c.steps
      << ";batch_size=" << c.batch_size << ";eval_samples=" << c.eval_samples
      << ";seed=" << c.seed << ";embedder=" << c.embedder_kind << ";d_embed=" << c.d_embed
      << ";center_radius=" << c.gen.center_radius << ";noise_scale=" << c.gen.noise_scale
      << ";samples=" << c.gen.samples_per_concept << ";cpt=" << c.gen.classes_per_task
      << ";";
    for (const auto& m : c.grid)
        s << "method{" << m.name() << ",r=" << m.rank << ",tau=" << m.tau
          << ",lf=" << m.weights.lambda_f << ",ls=" << m.weights.lambda_s
          << ",lr=" << m.learning_rate
          << ",opt=" << (m.optimizer == MethodConfig::Opt::adam ? "adam" : "sgd")
          << ",seed=" << m.seed << "};";
    return s.str();
}

std::string ExperimentConfig::hash() const {
    std::string s = canonical_config_string(*this);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::map<std::string, std::string> parse_config_text(const std::string& text) {
    std::map<std::string, std::string> keys;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    auto trim = [](std::string s) {
        auto issp = [](unsigned char c) { return std::isspace(c); };
        while (!s.empty() && issp(s.front())) s.erase(s.begin());
        while (!s.empty() && issp(s.back())) s.pop_back();
        return s;
    };
    while (std::getline(in, line)) {
        ++lineno;
        auto hash_pos = line.find('#');
        if (hash_pos != std::string::npos) line.erase(hash_pos);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": expected `key = value`");
        keys[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return keys;
}

static std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        while (!tok.empty() && tok.front() == ' ') tok.erase(tok.begin());
        while (!tok.empty() && tok.back() == ' ') tok.pop_back();
        if (!tok.empty()) out.push_back(tok);
    }
    return out;
}

static Ablations ablations_from_string(const std::string& s) {
    Ablations a;
    for (const auto& name : split_csv(s)) {
        if (name == "no_mask") a.no_mask = true;
        else if (name == "no_token_mlp") a.no_token_mlp = true;
        else if (name == "no_mask_mlp") a.no_mask_mlp = true;
        else if (name == "sigmoid_instead_of_gumbel") a.sigmoid_instead_of_gumbel = true;
        else if (name == "no_sparsity") a.no_sparsity = true;
        else throw ConfigError("unknown ablation: " + name);
    }
    return a;
}

ExperimentConfig config_from_keys(const std::map<std::string, std::string>& keys) {
    ExperimentConfig c;
    auto get = [&](const char* k) -> const std::string* {
        auto it = keys.find(k);
        return it == keys.end() ? nullptr : &it->second;
    };
    if (auto* v = get("mode")) c.mode = mode_from_string(*v);
    if (auto* v = get("n_tasks")) c.n_tasks = std::stoi(*v);
    if (auto* v = get("steps")) c.steps = std::stoi(*v);
    if (auto* v = get("batch_size")) c.batch_size = std::stoi(*v);
    if (auto* v = get("eval_samples")) c.eval_samples = std::stoi(*v);
    if (auto* v = get("seed")) c.seed = std::stoull(*v);
    if (auto* v = get("out")) c.out_dir = *v;
    if (auto* v = get("embedder")) c.embedder_kind = *v;
    if (auto* v = get("d_embed")) c.d_embed = std::stol(*v);
    if (auto* v = get("center_radius")) c.gen.center_radius = std::stod(*v);
    if (auto* v = get("noise_scale")) c.gen.noise_scale = std::stod(*v);
    if (auto* v = get("samples_per_concept")) c.gen.samples_per_concept = std::stoi(*v);
    if (auto* v = get("classes_per_task")) c.gen.classes_per_task = std::stoi(*v);
    c.gen.mode = c.mode;
    c.gen.seed = c.seed;
    c.gen.samples_per_concept = std::max(c.gen.samples_per_concept, 4);
    std::vector<std::string> methods = {"stamina"};
    if (auto* v = get("methods")) methods = split_csv(*v);
    for (const auto& name : methods) {
        MethodConfig m = MethodConfig::defaults(method_from_string(name));
        if (auto* v = get("rank")) m.rank = std::stol(*v);
        if (auto* v = get("tau")) m.tau = std::stod(*v);
        if (auto* v = get("learning_rate")) m.learning_rate = std::stod(*v);
        if (auto* v = get("pretrain_steps")) m.pretrain_steps = std::stoi(*v);
        if (auto* v = get("optimizer"))
            m.optimizer = *v == "sgd" ? MethodConfig::Opt::sgd : MethodConfig::Opt::adam;
        if (m.method == Method::stamina) {
            if (auto* v = get("lambda_f")) m.weights.lambda_f = std::stod(*v);
            if (auto* v = get("lambda_s")) m.weights.lambda_s = std::stod(*v);
            if (auto* v = get("ablations")) m.ablations = ablations_from_string(*v);
            if (m.ablations.no_sparsity) m.weights.lambda_s = 0.0;
        }
        if (m.method == Method::clora)
            if (auto* v = get("clora_lambda_f")) m.weights.lambda_f = std::stod(*v);
        m.seed = c.seed;
        c.grid.push_back(m);
    }
    return c;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return config_from_keys(parse_config_text(ss.str()));
}

std::vector<MethodConfig> ablation_grid(const MethodConfig& base) {
    if (base.method != Method::stamina)
        throw ConfigError("ablation grid requires the stamina method");
    std::vector<MethodConfig> grid;
    grid.push_back(base);
    auto push = [&](auto setter) {
        MethodConfig m = base;
        setter(m);
        grid.push_back(m);
    };
    push([](MethodConfig& m) { m.ablations.no_mask = true; });
    push([](MethodConfig& m) { m.ablations.no_token_mlp = true; });
    push([](MethodConfig& m) { m.ablations.no_mask_mlp = true; });
    push([](MethodConfig& m) { m.ablations.sigmoid_instead_of_gumbel = true; });
    push([](MethodConfig& m) {
        m.ablations.no_sparsity = true;
        m.weights.lambda_s = 0.0;
    });
    return grid;
}

RunReport make_report(const std::string& run_id, const MethodConfig& cfg,
                      const ContinualLog& log, const std::vector<Mat>& dataset_embeds,
                      Mode mode) {
    RunReport r;
    r.run_id = run_id;
    r.cfg = cfg;
    r.log = log;
    r.interference = interference_series(log);
    r.weight_distance = weight_distance_series(log);
    if (mode == Mode::denoiser) {
        r.a = a_mmd(log, dataset_embeds);
        if (log.n_tasks >= 2) r.f = f_mmd(log);
        r.p = p_mmd(log, dataset_embeds);
        for (int j = 1; j <= log.n_tasks; ++j)
            r.plasticity_per_task.push_back(1e3 *
                                            mmd2(dataset_embeds[j - 1], log.snapshot(j, j)));
    } else {
        const auto& final_row = log.accuracy.back();
        double s = 0;
        for (double a : final_row) s += a;
        r.final_avg_accuracy = s / double(final_row.size());
    }
    return r;
}

ordered_json report_to_json(const RunReport& r, const std::string& config_hash) {
    ordered_json j;
    j["run_id"] = r.run_id;
    j["method"] = r.cfg.name();
    j["config_hash"] = config_hash;
    j["seed"] = r.cfg.seed;
    j["n_param_pct"] = r.log.trainable_param_pct;
    j["a_mmd"] = r.a;
    j["f_mmd"] = r.f;
    j["p_mmd"] = r.p;
    j["final_avg_accuracy"] = r.final_avg_accuracy;
    j["interference"] = r.interference;
    j["weight_distance"] = r.weight_distance;
    j["plasticity_per_task"] = r.plasticity_per_task;
    j["loss_first_last"] = ordered_json::array();
    for (const auto& curve : r.log.loss_curves)
        j["loss_first_last"].push_back({curve.front(), curve.back()});
    j["accuracy"] = r.log.accuracy;
    return j;
}

static double round2_half_even(double v) {
    // default FP rounding is to-nearest-even
    return std::nearbyint(v * 100.0) / 100.0;
}

std::string report_table(const std::vector<RunReport>& runs, Mode mode) {
    std::ostringstream s;
    char line[256];
    if (mode == Mode::denoiser) {
        std::snprintf(line, sizeof line, "%-32s %10s %10s %10s %10s\n", "Method",
                      "N_param%", "A_mmd", "F_mmd", "P_mmd");
        s << line;
        for (const auto& r : runs) {
            std::snprintf(line, sizeof line, "%-32s %10.2f %10.2f %10.2f %10.2f\n",
                          r.run_id.c_str(), round2_half_even(r.log.trainable_param_pct),
                          round2_half_even(r.a), round2_half_even(r.f),
                          round2_half_even(r.p));
            s << line;
        }
    } else {
        std::snprintf(line, sizeof line, "%-32s %10s %12s\n", "Method", "N_param%",
                      "FinalAcc%");
        s << line;
        for (const auto& r : runs) {
            std::snprintf(line, sizeof line, "%-32s %10.2f %12.2f\n", r.run_id.c_str(),
                          round2_half_even(r.log.trainable_param_pct),
                          round2_half_even(r.final_avg_accuracy));
            s << line;
        }
    }
    return s.str();
}

void write_series_csv(const std::string& path, const std::string& series_name,
                      const std::vector<double>& values) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << "task," << series_name << "\n";
    char buf[64];
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", values[i]);
        f << (i + 1) << "," << buf << "\n";
    }
}

static std::string run_dir_name(const MethodConfig& m) {
    std::string id = m.name();
    std::replace(id.begin(), id.end(), '+', '_');
    return id;
}

static RunReport execute_grid_entry(const ExperimentConfig& cfg, const MethodConfig& m,
                                    const GeneratedTasks& tasks, const Embedder& embedder) {
    std::string run_id = run_dir_name(m);
    fs::path dir = fs::path(cfg.out_dir) / run_id;
    fs::create_directories(dir / "checkpoints");
    std::string config_hash = cfg.hash();

    ContinualModel model = ContinualModel::init(cfg.mode, m, m.seed);
    ContinualLog log;
    log.n_tasks = cfg.n_tasks;
    int start_task = 1;
    if (cfg.resume) {
        for (int t = cfg.n_tasks; t >= 1; --t) {
            fs::path ck = dir / "checkpoints" / ("task_" + std::to_string(t) + ".json");
            if (!fs::exists(ck)) continue;
            ordered_json j = read_json_file(ck.string());
            if (j.at("config_hash").get<std::string>() != config_hash)
                throw std::runtime_error("resume refused: config hash mismatch at " +
                                         ck.string());
            model = model_from_json(j.at("model"));
            log = log_from_json(j.at("log"));
            log.n_tasks = cfg.n_tasks;
            start_task = t + 1;
            break;
        }
    }

    TaskDataSource data(tasks.batches);
    for (int t = start_task; t <= cfg.n_tasks; ++t) {
        run_one_task(model, tasks.specs[t - 1], m, data, embedder, cfg.eval_samples, log);
        fs::path ck = dir / "checkpoints" / ("task_" + std::to_string(t) + ".json");
        write_json_file(ck.string(), checkpoint_to_json(model, log, config_hash));
    }

    RunReport report = make_report(run_id, m, log, tasks.dataset_embeds, cfg.mode);
    write_json_file((dir / "report.json").string(), report_to_json(report, config_hash));
    {
        std::ofstream f(dir / "report.txt", std::ios::binary);
        f << report_table({report}, cfg.mode);
    }
    write_series_csv((dir / "series_interference.csv").string(), "interference_pct",
                     report.interference);
    write_series_csv((dir / "series_weight_distance.csv").string(), "weight_distance",
                     report.weight_distance);
    write_series_csv((dir / "series_plasticity.csv").string(), "plasticity_mmd",
                     report.plasticity_per_task);
    // full log + dataset embeddings for offline metric recomputation
    ordered_json lj;
    lj["config_hash"] = config_hash;
    lj["mode"] = to_string(cfg.mode);
    lj["method"] = m.name();
    lj["log"] = log_to_json(log);
    lj["dataset_embeds"] = ordered_json::array();
    for (const auto& d : tasks.dataset_embeds) lj["dataset_embeds"].push_back(mat_to_json(d));
    write_json_file((dir / "continual_log.json").string(), lj);
    return report;
}

std::vector<RunReport> run_experiment(const ExperimentConfig& cfg) {
    if (cfg.grid.empty()) throw ConfigError("run_experiment: empty method grid");
    Embedder embedder = cfg.make_embedder();
    ConceptGenerator gen = cfg.gen;
    gen.mode = cfg.mode;
    gen.seed = cfg.seed;
    gen.eval_samples = cfg.eval_samples;
    GeneratedTasks tasks =
        generate_concepts(gen, cfg.n_tasks, embedder, cfg.steps, cfg.batch_size);

    int n_threads = 1;
    if (const char* env = std::getenv("STAMINA_THREADS")) n_threads = std::max(1, std::atoi(env));

    std::vector<RunReport> reports(cfg.grid.size());
    std::vector<std::string> errors(cfg.grid.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= cfg.grid.size()) return;
            try {
                reports[i] = execute_grid_entry(cfg, cfg.grid[i], tasks, embedder);
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
    };
    if (n_threads == 1 || cfg.grid.size() == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (std::size_t i = 0; i < errors.size(); ++i)
        if (!errors[i].empty())
            throw std::runtime_error("run " + cfg.grid[i].name() + " failed: " + errors[i]);

    std::ofstream f(fs::path(cfg.out_dir) / "summary.txt", std::ios::binary);
    f << report_table(reports, cfg.mode);
    return reports;
}

RunReport recompute_metrics(const std::string& run_dir) {
    ordered_json lj = read_json_file((fs::path(run_dir) / "continual_log.json").string());
    ContinualLog log = log_from_json(lj.at("log"));
    std::vector<Mat> dataset_embeds;
    for (const auto& d : lj.at("dataset_embeds")) dataset_embeds.push_back(mat_from_json(d));
    Mode mode = mode_from_string(lj.at("mode").get<std::string>());
    MethodConfig cfg;  // method name only used for labeling here
    RunReport r = make_report(fs::path(run_dir).filename().string(), cfg, log,
                              dataset_embeds, mode);
    return r;
}

int selftest() {
    int failures = 0;
    auto check = [&](const char* name, bool ok) {
        std::printf("%-40s %s\n", name, ok ? "ok" : "FAIL");
        if (!ok) ++failures;
    };

    // finite-difference gradient on a small matmul + mse graph
    {
        CounterRng rng(7, 1);
        Mat a0 = gaussian_rows(3, 4, 1.0, rng);
        Mat b0 = gaussian_rows(4, 2, 1.0, rng);
        Mat tgt = gaussian_rows(3, 2, 1.0, rng);
        auto loss_at = [&](const Mat& av) {
            Tape t;
            Tensor a = make_leaf(t, av);
            Tensor b = make_constant(t, b0);
            return mse(matmul(a, b), make_constant(t, tgt)).value()(0, 0);
        };
        Tape t;
        Tensor a = make_leaf(t, a0);
        Tensor b = make_constant(t, b0);
        Tensor l = mse(matmul(a, b), make_constant(t, tgt));
        t.backward(l);
        double worst = 0;
        const double h = 1e-5;
        for (long i = 0; i < a0.rows(); ++i)
            for (long j = 0; j < a0.cols(); ++j) {
                Mat ap = a0, am = a0;
                ap(i, j) += h;
                am(i, j) -= h;
                double fd = (loss_at(ap) - loss_at(am)) / (2 * h);
                double an = a.grad()(i, j);
                worst = std::max(worst,
                                 std::fabs(fd - an) / std::max(1.0, std::fabs(fd)));
            }
        check("gradient vs finite differences", worst < 1e-6);
    }

    // fold merges exactly (a b) masked by the noise-free hard mask
    {
        CounterRng rng(11, 2);
        AdaptedLinear layer = AdaptedLinear::init(gaussian_rows(4, 4, 0.5, rng), 2, rng);
        layer.a = gaussian_rows(4, 2, 0.5, rng);
        layer.b = gaussian_rows(2, 4, 0.5, rng);
        Mat mask =
            deterministic_mask(mask_logits_value(layer.mask_mlp), 4, 4);
        Mat expect = layer.w_prev + ((layer.a * layer.b).array() * mask.array()).matrix();
        CounterRng reinit(11, 3);
        fold(layer, reinit);
        check("fold equivalence",
              (layer.w_prev - expect).cwiseAbs().maxCoeff() < 1e-12 &&
                  layer.b.cwiseAbs().maxCoeff() == 0.0);
    }

    // unbiased MMD^2 against the direct double sum
    {
        CounterRng rng(13, 4);
        Mat x = gaussian_rows(5, 3, 1.0, rng);
        Mat y = gaussian_rows(4, 3, 1.0, rng);
        auto kern = [&](const Vec& u, const Vec& v) {
            double z = u.dot(v) / double(u.size()) + 1.0;
            return z * z * z;
        };
        double xx = 0, yy = 0, xy = 0;
        for (long i = 0; i < x.rows(); ++i)
            for (long j = 0; j < x.rows(); ++j)
                if (i != j) xx += kern(x.row(i), x.row(j));
        for (long i = 0; i < y.rows(); ++i)
            for (long j = 0; j < y.rows(); ++j)
                if (i != j) yy += kern(y.row(i), y.row(j));
        for (long i = 0; i < x.rows(); ++i)
            for (long j = 0; j < y.rows(); ++j) xy += kern(x.row(i), y.row(j));
        double oracle = xx / (5.0 * 4.0) + yy / (4.0 * 3.0) - 2.0 * xy / (5.0 * 4.0);
        check("mmd2 oracle", std::fabs(mmd2(x, y) - oracle) < 1e-12);
    }

    // two identical tiny runs produce identical snapshots
    {
        auto run = [] {
            MethodConfig cfg = MethodConfig::defaults(Method::stamina);
            cfg.seed = 5;
            ConceptGenerator gen;
            gen.seed = 5;
            Embedder e = Embedder::make_identity();
            GeneratedTasks tasks = generate_concepts(gen, 2, e, 10, 8);
            ContinualModel model = ContinualModel::init(Mode::denoiser, cfg, cfg.seed);
            TaskDataSource data(tasks.batches);
            return run_sequence(model, tasks.specs, cfg, data, e, 8);
        };
        ContinualLog la = run();
        ContinualLog lb = run();
        bool same = true;
        for (int i = 1; i <= 2 && same; ++i)
            for (int j = 1; j <= i && same; ++j)
                same = la.snapshot(i, j) == lb.snapshot(i, j);
        check("run determinism", same);
    }

    return failures;
}

}  // namespace stamina
