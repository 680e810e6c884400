#pragma once

#include "stamina/losses.hpp"
#include "stamina/metrics.hpp"
#include "stamina/models.hpp"

#include <string>
#include <unordered_map>
#include <vector>

namespace stamina {

enum class Mode { denoiser, classifier };
enum class Method { stamina, clora, naive };

std::string to_string(Mode m);
std::string to_string(Method m);
Mode mode_from_string(const std::string& s);
Method method_from_string(const std::string& s);

struct Ablations {
    bool no_mask = false;
    bool no_token_mlp = false;
    bool no_mask_mlp = false;
    bool sigmoid_instead_of_gumbel = false;
    bool no_sparsity = false;

    bool any() const {
        return no_mask || no_token_mlp || no_mask_mlp || sigmoid_instead_of_gumbel ||
               no_sparsity;
    }
    std::string tag() const;
};

struct MethodConfig {
    Method method = Method::stamina;
    Ablations ablations;
    long rank = 4;
    double tau = 0.5;
    LossWeights weights;  // stamina defaults; clora_defaults() swaps lambda_f
    double learning_rate = 5e-4;
    enum class Opt { sgd, adam } optimizer = Opt::adam;
    std::uint64_t seed = 0;
    int pretrain_steps = 1000;  // denoiser backbone pretraining before task 1
    bool pin_gumbel_zero = false;  // test hook: g = 0 everywhere

    static MethodConfig defaults(Method m);
    void validate() const;
    std::string name() const;
};

struct TaskSpec {
    int task_id = 1;
    std::uint64_t concept_seed = 0;
    int steps = 200;
    int batch_size = 16;
    Mode mode = Mode::denoiser;
};

struct SequencingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Sampled data for one concept task. Denoiser concepts are Gaussian
// clusters of flat vectors; classifier concepts are labeled token
// sequences.
struct ConceptBatch {
    Mat train;  // denoiser: n x data_dim
    Mat eval;
    std::vector<Mat> train_seqs;  // classifier
    std::vector<Mat> eval_seqs;
    std::vector<int> train_labels;
    std::vector<int> eval_labels;
    Vec center;
};

// Serves exactly one unlocked task at a time and records every access,
// making the rehearsal-free contract checkable.
class TaskDataSource {
public:
    explicit TaskDataSource(std::vector<ConceptBatch> batches)
        : batches_(std::move(batches)) {}

    void unlock(int task_id) { unlocked_ = task_id; }
    const ConceptBatch& batch(int task_id) const;
    // Evaluation-split access for metric snapshots; not gated (the
    // rehearsal-free contract covers training data only).
    const ConceptBatch& eval_batch(int task_id) const { return batches_.at(task_id - 1); }
    const std::vector<int>& access_log() const { return log_; }
    int size() const { return static_cast<int>(batches_.size()); }

private:
    std::vector<ConceptBatch> batches_;
    int unlocked_ = 0;
    mutable std::vector<int> log_;
};

// Plain SGD / Adam over raw parameter matrices.
class Optimizer {
public:
    Optimizer(MethodConfig::Opt kind, double lr) : kind_(kind), lr_(lr) {}
    void step(const std::vector<std::pair<Mat*, Mat>>& grads);

private:
    struct Slot {
        Mat m, v;
    };
    MethodConfig::Opt kind_;
    double lr_;
    long t_ = 0;
    std::unordered_map<Mat*, Slot> slots_;
};

// One continually adapted model plus its live per-task token machinery.
struct ContinualModel {
    Mode mode = Mode::denoiser;
    ToyDenoiser denoiser;
    ToyClassifier classifier;

    TokenMlp token_mlp;           // stamina denoiser tokens
    Mat plain_token;              // 1 x token_dim, used by clora/naive/no_token_mlp
    std::vector<Mat> direct_logits;  // per layer, no_mask_mlp ablation
    std::vector<Mat> concept_tokens;  // folded token per completed task
    std::vector<Mat> task_start_w;    // naive: per-layer weight at task start

    Mat head_block;                // classifier: live head columns for the current task
    std::vector<int> head_classes;  // global class ids owning those columns

    int tasks_completed = 0;
    int next_task = 1;

    static ContinualModel init(Mode mode, const MethodConfig& cfg,
                               std::uint64_t model_seed);

    std::vector<AdaptedLinear*> adapted_layers();
    std::vector<const AdaptedLinear*> adapted_layers() const;
    long live_trainable_param_count(const MethodConfig& cfg) const;
    long backbone_param_count() const;
};

struct TrainTaskResult {
    std::vector<double> loss_curve;
};

// One optimization pass for one task; history and backbone stay frozen.
TrainTaskResult train_task(ContinualModel& model, const TaskSpec& spec,
                           const MethodConfig& cfg, const ConceptBatch& data);

// Fold every adapted layer, materialize the concept token, and snapshot
// generations / accuracies for every task seen so far.
void end_task(ContinualModel& model, int t, const MethodConfig& cfg,
              const Embedder& embedder, const TaskDataSource& data, int n_eval_samples,
              ContinualLog& log);

// One train/fold cycle: unlock, train, fold, snapshot. run_sequence and
// the experiment harness (which checkpoints between tasks) both use this.
void run_one_task(ContinualModel& model, const TaskSpec& spec, const MethodConfig& cfg,
                  TaskDataSource& data, const Embedder& embedder, int n_eval_samples,
                  ContinualLog& log);

// Full continual run over the task list.
ContinualLog run_sequence(ContinualModel& model, const std::vector<TaskSpec>& specs,
                          const MethodConfig& cfg, TaskDataSource& data,
                          const Embedder& embedder, int n_eval_samples = 32);

// Deterministic sampling from the folded model for a learned concept.
Mat toy_denoiser_generate(const ContinualModel& model, int concept_id, int n_samples,
                          std::uint64_t seed);

// Generation noise stream for concept j under a run seed; fixed across
// task boundaries so identical weights reproduce identical snapshots.
std::uint64_t generation_seed(std::uint64_t run_seed, int concept_id);

// Single gradient step helper shared by train_task and the tests:
// builds the step graph, returns the loss breakdown, and applies updates
// through opt when non-null.
LossBreakdown training_step(ContinualModel& model, const MethodConfig& cfg,
                            const TaskSpec& spec, const ConceptBatch& data, int step_index,
                            Optimizer* opt);

}  // namespace stamina
