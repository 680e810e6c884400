#include "stamina/trainer.hpp"

#include <cmath>

namespace stamina {

std::string to_string(Mode m) { return m == Mode::denoiser ? "denoiser" : "classifier"; }
std::string to_string(Method m) {
    switch (m) {
        case Method::stamina: return "stamina";
        case Method::clora: return "clora";
        default: return "naive";
    }
}

Mode mode_from_string(const std::string& s) {
    if (s == "denoiser") return Mode::denoiser;
    if (s == "classifier") return Mode::classifier;
    throw ConfigError("unknown mode: " + s);
}

Method method_from_string(const std::string& s) {
    if (s == "stamina") return Method::stamina;
    if (s == "clora") return Method::clora;
    if (s == "naive") return Method::naive;
    throw ConfigError("unknown method: " + s);
}

std::string Ablations::tag() const {
    std::string t;
    if (no_mask) t += "+no_mask";
    if (no_token_mlp) t += "+no_token_mlp";
    if (no_mask_mlp) t += "+no_mask_mlp";
    if (sigmoid_instead_of_gumbel) t += "+sigmoid";
    if (no_sparsity) t += "+no_sparsity";
    return t;
}

MethodConfig MethodConfig::defaults(Method m) {
    MethodConfig c;
    c.method = m;
    switch (m) {
        case Method::stamina:
            c.weights = LossWeights{1e3, 1e-3};
            break;
        case Method::clora:
            c.weights = LossWeights{1e8, 0.0};
            break;
        case Method::naive:
            c.weights = LossWeights{0.0, 0.0};
            break;
    }
    return c;
}

void MethodConfig::validate() const {
    if (ablations.any() && method != Method::stamina)
        throw ConfigError("ablations are only valid for the stamina method");
    if (rank < 1) throw ConfigError("rank must be >= 1");
    if (!(tau > 0.0)) throw ConfigError("tau must be > 0");
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
    if (pretrain_steps < 0) throw ConfigError("pretrain_steps must be >= 0");
    weights.validate();
}

std::string MethodConfig::name() const { return to_string(method) + ablations.tag(); }

const ConceptBatch& TaskDataSource::batch(int task_id) const {
    log_.push_back(task_id);
    if (task_id != unlocked_)
        throw SequencingError("rehearsal-free violation: task " + std::to_string(task_id) +
                              " data requested while task " + std::to_string(unlocked_) +
                              " is in training");
    return batches_.at(task_id - 1);
}

void Optimizer::step(const std::vector<std::pair<Mat*, Mat>>& grads) {
    ++t_;
    for (const auto& [p, g] : grads) {
        if (kind_ == MethodConfig::Opt::sgd) {
            *p -= lr_ * g;
            continue;
        }
        Slot& s = slots_[p];
        if (s.m.size() == 0) {
            s.m = Mat::Zero(p->rows(), p->cols());
            s.v = Mat::Zero(p->rows(), p->cols());
        }
        constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        s.m = b1 * s.m + (1.0 - b1) * g;
        s.v = (b2 * s.v.array() + (1.0 - b2) * g.array().square()).matrix();
        double c1 = 1.0 - std::pow(b1, double(t_));
        double c2 = 1.0 - std::pow(b2, double(t_));
        p->array() -= lr_ * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + eps);
    }
}

void pretrain_denoiser_backbone(ToyDenoiser& net, int steps, std::uint64_t seed);

ContinualModel ContinualModel::init(Mode mode, const MethodConfig& cfg,
                                    std::uint64_t model_seed) {
    cfg.validate();
    ContinualModel m;
    m.mode = mode;
    if (mode == Mode::denoiser) {
        m.denoiser = ToyDenoiser::init(cfg.rank, model_seed);
        pretrain_denoiser_backbone(m.denoiser, cfg.pretrain_steps, model_seed);
    }
    else
        m.classifier = ToyClassifier::init(cfg.rank, 10, model_seed);
    long d_token = mode == Mode::denoiser ? m.denoiser.token_dim : 0;
    CounterRng rng(cfg.seed, stream_id(0x70C, 0));
    if (mode == Mode::denoiser) {
        m.token_mlp = TokenMlp::init(d_token, rng);
        m.plain_token = Mat::Zero(1, d_token);
    }
    for (const auto* l : m.adapted_layers())
        m.direct_logits.push_back(Mat::Zero(1, l->d1() * l->d2() * 2));
    return m;
}

std::vector<AdaptedLinear*> ContinualModel::adapted_layers() {
    return mode == Mode::denoiser ? denoiser.adapted_layers() : classifier.adapted_layers();
}

std::vector<const AdaptedLinear*> ContinualModel::adapted_layers() const {
    return mode == Mode::denoiser ? denoiser.adapted_layers() : classifier.adapted_layers();
}

long ContinualModel::backbone_param_count() const {
    return mode == Mode::denoiser ? denoiser.backbone_param_count()
                                  : classifier.backbone_param_count();
}

long ContinualModel::live_trainable_param_count(const MethodConfig& cfg) const {
    long n = 0;
    for (const auto* l : adapted_layers()) {
        switch (cfg.method) {
            case Method::naive:
                n += l->w_init.size();
                break;
            case Method::clora:
                n += l->a.size() + l->b.size();
                break;
            case Method::stamina:
                n += l->a.size() + l->b.size();
                if (!cfg.ablations.no_mask) {
                    if (cfg.ablations.no_mask_mlp)
                        n += l->d1() * l->d2() * 2;
                    else
                        n += l->mask_mlp.l1.size() + l->mask_mlp.l2.size();
                }
                break;
        }
    }
    if (mode == Mode::denoiser) {
        bool mlp_token = cfg.method == Method::stamina && !cfg.ablations.no_token_mlp;
        n += mlp_token ? token_mlp.l1.size() + token_mlp.l2.size() : plain_token.size();
    } else {
        n += cfg.method == Method::naive ? classifier.head.size() : head_block.size();
    }
    return n;
}

std::uint64_t generation_seed(std::uint64_t run_seed, int concept_id) {
    return CounterRng::hash(run_seed, 0x6E2, static_cast<std::uint64_t>(concept_id));
}

// --- step graph ---------------------------------------------------------

namespace {

struct ParamSet {
    std::vector<std::pair<Mat*, Tensor>> entries;

    Tensor leaf(Tape& t, Mat* p) {
        Tensor x = make_leaf(t, *p);
        entries.emplace_back(p, x);
        return x;
    }
};

struct LayerGraph {
    Tensor w_eff;
    std::optional<Tensor> residual;
    std::optional<Tensor> soft_mask;
};

LayerGraph build_layer(Tape& t, AdaptedLinear& layer, Mat& direct_logits,
                       const MethodConfig& cfg, std::uint64_t step_key,
                       std::uint64_t layer_id, ParamSet& params) {
    LayerGraph g;
    if (cfg.method == Method::naive) {
        g.w_eff = params.leaf(t, &layer.w_prev);
        return g;
    }
    Tensor a = params.leaf(t, &layer.a);
    Tensor b = params.leaf(t, &layer.b);
    Tensor w_prev = make_constant(t, layer.w_prev);
    if (cfg.method == Method::clora || cfg.ablations.no_mask) {
        g.residual = matmul(a, b);
        g.w_eff = add(w_prev, *g.residual);
        return g;
    }
    Tensor flat = cfg.ablations.no_mask_mlp
                      ? params.leaf(t, &direct_logits)
                      : [&] {
                            MaskMlpGraph mg{params.leaf(t, &layer.mask_mlp.l1),
                                            params.leaf(t, &layer.mask_mlp.l2)};
                            return mask_logits(t, mg, layer.rank);
                        }();
    long d1 = layer.d1(), d2 = layer.d2();
    Tensor mask;
    if (cfg.ablations.sigmoid_instead_of_gumbel) {
        Tensor soft = sigmoid(channel_split(flat, d1, d2, 1));
        g.soft_mask = soft;
        mask = soft;
    } else {
        GumbelConfig gc{cfg.tau, true, cfg.seed};
        Mat g0, g1;
        if (cfg.pin_gumbel_zero) {
            g0 = Mat::Zero(d1, d2);
            g1 = Mat::Zero(d1, d2);
        } else {
            g0 = sample_gumbel(d1, d2, cfg.seed, layer_id, step_key, 0);
            g1 = sample_gumbel(d1, d2, cfg.seed, layer_id, step_key, 1);
        }
        MaskSample ms = gumbel_softmax_mask(t, flat, d1, d2, gc, g0, g1);
        g.soft_mask = ms.soft;
        mask = ms.mask;
    }
    g.residual = mul(matmul(a, b), mask);
    g.w_eff = add(w_prev, *g.residual);
    return g;
}

// Denoiser diffusion minibatch (noisy samples, targets, schedule scales).
struct DenoiserBatch {
    Mat x_t, eps, temb_rows, sqrt_ab, inv_sqrt_1mab;
};

DenoiserBatch sample_denoiser_batch(const ToyDenoiser& net, const ConceptBatch& data,
                                    int batch_size, std::uint64_t seed,
                                    std::uint64_t step_key) {
    CounterRng rng(seed, stream_id(0xBA7C, step_key));
    long d = net.data_dim;
    DenoiserBatch b;
    b.x_t.resize(batch_size, d);
    b.eps.resize(batch_size, d);
    b.temb_rows.resize(batch_size, d);
    b.sqrt_ab.resize(batch_size, d);
    b.inv_sqrt_1mab.resize(batch_size, d);
    for (int i = 0; i < batch_size; ++i) {
        long row = static_cast<long>(rng.below(data.train.rows()));
        int k = 1 + static_cast<int>(rng.below(net.n_steps));
        double sa = std::sqrt(net.alpha_bar[k]);
        double sb = std::sqrt(1.0 - net.alpha_bar[k]);
        for (long j = 0; j < d; ++j) {
            double e = rng.gaussian();
            b.eps(i, j) = e;
            b.x_t(i, j) = sa * data.train(row, j) + sb * e;
            b.sqrt_ab(i, j) = sa;
            b.inv_sqrt_1mab(i, j) = 1.0 / sb;
        }
        b.temb_rows.row(i) = net.temb.row(k);
    }
    return b;
}

Tensor denoiser_task_loss(Tape& t, const ToyDenoiser& net,
                          const std::vector<LayerGraph>& layers, const Tensor& token,
                          const DenoiserBatch& b) {
    Tensor f0 = make_constant(t, b.x_t + b.temb_rows);
    Tensor c = concat_rows(make_constant(t, net.ctx), token);
    Tensor f = f0;
    for (std::size_t i = 0; i < net.blocks.size(); ++i) {
        const auto& blk = net.blocks[i];
        Tensor q = matmul(f, make_constant(t, blk.wq));
        Tensor kk = matmul(c, layers[2 * i].w_eff);
        Tensor vv = matmul(c, layers[2 * i + 1].w_eff);
        Tensor attn = scaled_dot_attention(q, kk, vv);
        f = add(f, matmul(attn, make_constant(t, blk.wo)));
    }
    Tensor x0_hat = sub(f, f0);
    Tensor eps_hat = mul(sub(make_constant(t, b.x_t), mul(x0_hat, make_constant(t, b.sqrt_ab))),
                         make_constant(t, b.inv_sqrt_1mab));
    // Batch-mean squared error with a per-dimension normalization; the 2x
    // gain calibrates the task gradient against the pinned regularizer
    // weights at toy scale.
    return scale(l2_norm_sq(sub(eps_hat, make_constant(t, b.eps))),
                 2.0 / double(net.data_dim) / double(b.eps.rows()));
}

Tensor classifier_task_loss(Tape& t, ContinualModel& model, ParamSet& params,
                            const std::vector<LayerGraph>& layers, bool full_head,
                            const ConceptBatch& data, int batch_size, std::uint64_t seed,
                            std::uint64_t step_key) {
    ToyClassifier& net = model.classifier;
    CounterRng rng(seed, stream_id(0xBA7C, step_key));
    const Tensor& wq = layers[0].w_eff;
    const Tensor& wk = layers[1].w_eff;
    const Tensor& wv = layers[2].w_eff;
    Tensor wo = make_constant(t, net.wo);
    // Adapter methods train fresh head columns for this task's classes and
    // keep earlier columns frozen; naive fine-tunes the whole head.
    Tensor head, block, sel_t;
    if (full_head) {
        head = params.leaf(t, &net.head);
    } else {
        head = make_constant(t, net.head);
        block = params.leaf(t, &model.head_block);
        Mat sel = Mat::Zero(model.head_block.cols(), net.n_classes);
        for (std::size_t i = 0; i < model.head_classes.size(); ++i)
            sel(static_cast<long>(i), model.head_classes[i]) = 1.0;
        sel_t = make_constant(t, sel);
    }
    Mat pool = Mat::Constant(1, net.seq_len, 1.0 / double(net.seq_len));
    Tensor pool_t = make_constant(t, pool);
    std::vector<int> labels;
    Tensor logits;
    for (int i = 0; i < batch_size; ++i) {
        long s = static_cast<long>(rng.below(data.train_seqs.size()));
        labels.push_back(data.train_labels[s]);
        Tensor x = make_constant(t, data.train_seqs[s]);
        Tensor attn = scaled_dot_attention(matmul(x, wq), matmul(x, wk), matmul(x, wv));
        Tensor feat = matmul(pool_t, matmul(attn, wo));
        Tensor z = full_head
                       ? matmul(feat, head)
                       : add(matmul(feat, head), matmul(matmul(feat, block), sel_t));
        logits = i == 0 ? z : concat_rows(logits, z);
    }
    return cross_entropy(logits, labels);
}

}  // namespace

// Generic denoising pretraining: concept-free shell data, zero token.
// Trains the adapted projections' base weights in place.
void pretrain_denoiser_backbone(ToyDenoiser& net, int steps, std::uint64_t seed) {
    if (steps <= 0) return;
    // Shell prior matching the toy concept scale: centers on the radius-1.5
    // sphere, isotropic noise 0.15.
    double radius = 1.5;
    double noise = 0.15;
    int batch_size = 16;
    Optimizer opt(MethodConfig::Opt::adam, 5e-4);
    std::uint64_t pre_seed = CounterRng::hash(seed, 0x93E7, 0);
    for (int s = 0; s < steps; ++s) {
        CounterRng rng(pre_seed, stream_id(0x9147, static_cast<std::uint64_t>(s)));
        ConceptBatch data;
        data.train.resize(batch_size * 2, net.data_dim);
        for (long i = 0; i < data.train.rows(); ++i) {
            Vec dir(net.data_dim);
            for (long j = 0; j < net.data_dim; ++j) dir(j) = rng.gaussian();
            dir *= radius / dir.norm();
            for (long j = 0; j < net.data_dim; ++j)
                data.train(i, j) = dir(j) + noise * rng.gaussian();
        }
        Tape t;
        ParamSet params;
        std::vector<LayerGraph> graphs;
        for (auto* l : net.adapted_layers()) {
            LayerGraph g;
            g.w_eff = params.leaf(t, &l->w_init);
            graphs.push_back(std::move(g));
        }
        Tensor token = make_constant(t, Mat::Zero(1, net.token_dim));
        DenoiserBatch b =
            sample_denoiser_batch(net, data, batch_size, pre_seed, static_cast<std::uint64_t>(s));
        Tensor loss = denoiser_task_loss(t, net, graphs, token, b);
        t.backward(loss);
        std::vector<std::pair<Mat*, Mat>> grads;
        for (auto& [p, x] : params.entries)
            if (x.grad().size() != 0) grads.emplace_back(p, x.grad());
        opt.step(grads);
    }
    for (auto* l : net.adapted_layers()) l->w_prev = l->w_init;
}

LossBreakdown training_step(ContinualModel& model, const MethodConfig& cfg,
                            const TaskSpec& spec, const ConceptBatch& data, int step_index,
                            Optimizer* opt) {
    Tape t;
    ParamSet params;
    std::uint64_t step_key =
        static_cast<std::uint64_t>(spec.task_id) * 1000003ULL + step_index;
    auto layers = model.adapted_layers();
    std::vector<LayerGraph> graphs;
    for (std::size_t i = 0; i < layers.size(); ++i)
        graphs.push_back(build_layer(t, *layers[i], model.direct_logits[i], cfg, step_key,
                                     i, params));

    Tensor task;
    if (model.mode == Mode::denoiser) {
        bool mlp_token = cfg.method == Method::stamina && !cfg.ablations.no_token_mlp;
        Tensor token;
        if (mlp_token) {
            TokenMlpGraph tg{params.leaf(t, &model.token_mlp.l1),
                             params.leaf(t, &model.token_mlp.l2)};
            token = token_embed(t, tg);
        } else {
            token = params.leaf(t, &model.plain_token);
        }
        DenoiserBatch b = sample_denoiser_batch(model.denoiser, data, spec.batch_size,
                                                cfg.seed, step_key);
        task = denoiser_task_loss(t, model.denoiser, graphs, token, b);
    } else {
        task = classifier_task_loss(t, model, params, graphs,
                                    cfg.method == Method::naive, data, spec.batch_size,
                                    cfg.seed, step_key);
    }

    std::optional<Tensor> forget, sparse;
    if (cfg.method != Method::naive) {
        for (std::size_t i = 0; i < layers.size(); ++i) {
            Tensor fl = forgetting_loss(t, *layers[i], *graphs[i].residual);
            forget = forget ? add(*forget, fl) : fl;
            if (graphs[i].soft_mask && !cfg.ablations.no_sparsity) {
                Tensor sl = sparsity_loss(*graphs[i].soft_mask);
                sparse = sparse ? add(*sparse, sl) : sl;
            }
        }
    }

    TotalLoss loss = total_loss(t, cfg.weights, task, forget, sparse);
    if (opt) {
        t.backward(loss.total);
        std::vector<std::pair<Mat*, Mat>> grads;
        for (auto& [p, leaf] : params.entries) {
            const Mat& g = leaf.grad();
            grads.emplace_back(p, g.size() == 0 ? Mat::Zero(p->rows(), p->cols()) : g);
        }
        opt->step(grads);
    }
    return loss.parts;
}

TrainTaskResult train_task(ContinualModel& model, const TaskSpec& spec,
                           const MethodConfig& cfg, const ConceptBatch& data) {
    cfg.validate();
    if (spec.task_id != model.next_task)
        throw SequencingError("train_task: expected task " +
                              std::to_string(model.next_task) + ", got " +
                              std::to_string(spec.task_id));
    if ((spec.mode == Mode::denoiser) != (model.mode == Mode::denoiser))
        throw ConfigError("train_task: task mode does not match model mode");
    TrainTaskResult res;
    if (model.mode == Mode::classifier && cfg.method != Method::naive) {
        std::vector<int> cls(data.train_labels.begin(), data.train_labels.end());
        std::sort(cls.begin(), cls.end());
        cls.erase(std::unique(cls.begin(), cls.end()), cls.end());
        model.head_classes = std::move(cls);
        model.head_block = Mat::Zero(model.classifier.token_dim,
                                     static_cast<long>(model.head_classes.size()));
    }
    Optimizer opt(cfg.optimizer, cfg.learning_rate);
    for (int s = 0; s < spec.steps; ++s) {
        LossBreakdown b = training_step(model, cfg, spec, data, s, &opt);
        res.loss_curve.push_back(b.total);
    }
    return res;
}

void end_task(ContinualModel& model, int t, const MethodConfig& cfg,
              const Embedder& embedder, const TaskDataSource& data, int n_eval_samples,
              ContinualLog& log) {
    if (t != model.next_task)
        throw SequencingError("end_task: expected task " + std::to_string(model.next_task));
    auto layers = model.adapted_layers();
    CounterRng reinit_rng(cfg.seed, stream_id(0x4E17, static_cast<std::uint64_t>(t)));

    std::vector<std::pair<long, long>> interference;
    std::vector<double> dists;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        AdaptedLinear& layer = *layers[i];
        Mat delta;
        if (cfg.method == Method::naive) {
            delta = layer.w_prev - model.task_start_w[i];
        } else if (cfg.method == Method::clora || cfg.ablations.no_mask) {
            delta = layer.a * layer.b;
        } else {
            Mat flat = cfg.ablations.no_mask_mlp ? model.direct_logits[i]
                                                 : mask_logits_value(layer.mask_mlp);
            delta = (layer.a * layer.b)
                        .cwiseProduct(deterministic_mask(flat, layer.d1(), layer.d2()));
        }
        long support = 0, fresh = 0;
        for (long r = 0; r < delta.rows(); ++r)
            for (long c = 0; c < delta.cols(); ++c)
                if (delta(r, c) != 0.0) {
                    ++support;
                    if (layer.changed_mask(r, c) == 0.0) ++fresh;
                }
        interference.emplace_back(fresh, support);
        if (cfg.method != Method::naive) layer.w_prev += delta;
        for (long r = 0; r < delta.rows(); ++r)
            for (long c = 0; c < delta.cols(); ++c)
                if (delta(r, c) != 0.0) layer.changed_mask(r, c) = 1.0;
        layer.reinit_adapter(reinit_rng);
        model.direct_logits[i].setZero();
        dists.push_back((layer.w_prev - layer.w_init).norm());
    }
    log.interference_counts.push_back(std::move(interference));
    log.weight_dist.push_back(std::move(dists));

    if (model.mode == Mode::denoiser) {
        bool mlp_token = cfg.method == Method::stamina && !cfg.ablations.no_token_mlp;
        Mat token = mlp_token ? token_embed_value(model.token_mlp) : model.plain_token;
        model.concept_tokens.push_back(token);
        CounterRng rng(cfg.seed, stream_id(0x70C, static_cast<std::uint64_t>(t)));
        model.token_mlp = TokenMlp::init(model.denoiser.token_dim, rng);
        model.plain_token.setZero();
        for (int j = 1; j <= t; ++j) {
            Mat gen = model.denoiser.generate(model.concept_tokens[j - 1], n_eval_samples,
                                              generation_seed(cfg.seed, j));
            log.record_snapshot(t, j, embedder.embed(gen));
        }
    } else {
        // Freeze the trained head columns into the shared head.
        for (std::size_t i = 0; i < model.head_classes.size(); ++i)
            model.classifier.head.col(model.head_classes[i]) =
                model.head_block.col(static_cast<long>(i));
        std::vector<double> acc_row;
        for (int j = 1; j <= t; ++j) {
            const ConceptBatch& b = data.eval_batch(j);
            int correct = 0;
            for (std::size_t s = 0; s < b.eval_seqs.size(); ++s)
                if (model.classifier.predict(b.eval_seqs[s]) == b.eval_labels[s]) ++correct;
            acc_row.push_back(100.0 * correct / double(b.eval_seqs.size()));
        }
        log.accuracy.push_back(std::move(acc_row));
    }
    model.tasks_completed = t;
    model.next_task = t + 1;
}

void run_one_task(ContinualModel& model, const TaskSpec& spec, const MethodConfig& cfg,
                  TaskDataSource& data, const Embedder& embedder, int n_eval_samples,
                  ContinualLog& log) {
    data.unlock(spec.task_id);
    if (cfg.method == Method::naive) {
        model.task_start_w.clear();
        for (const auto* l : model.adapted_layers()) model.task_start_w.push_back(l->w_prev);
    }
    TrainTaskResult r = train_task(model, spec, cfg, data.batch(spec.task_id));
    log.loss_curves.push_back(std::move(r.loss_curve));
    data.unlock(0);
    end_task(model, spec.task_id, cfg, embedder, data, n_eval_samples, log);
    log.trainable_param_pct = 100.0 * double(model.live_trainable_param_count(cfg)) /
                              double(model.backbone_param_count());
}

ContinualLog run_sequence(ContinualModel& model, const std::vector<TaskSpec>& specs,
                          const MethodConfig& cfg, TaskDataSource& data,
                          const Embedder& embedder, int n_eval_samples) {
    cfg.validate();
    ContinualLog log;
    log.n_tasks = static_cast<int>(specs.size());
    for (const auto& spec : specs)
        run_one_task(model, spec, cfg, data, embedder, n_eval_samples, log);
    return log;
}

Mat toy_denoiser_generate(const ContinualModel& model, int concept_id, int n_samples,
                          std::uint64_t seed) {
    if (concept_id < 1 || concept_id > static_cast<int>(model.concept_tokens.size()))
        throw std::out_of_range("unknown concept " + std::to_string(concept_id));
    return model.denoiser.generate(model.concept_tokens[concept_id - 1], n_samples, seed);
}

}  // namespace stamina
