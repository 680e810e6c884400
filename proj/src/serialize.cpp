#include "stamina/serialize.hpp"

#include <fstream>

namespace stamina {

ordered_json mat_to_json(const Mat& m) {
    ordered_json j;
    j["rows"] = m.rows();
    j["cols"] = m.cols();
    std::vector<double> data(m.data(), m.data() + m.size());
    j["data"] = data;
    return j;
}

Mat mat_from_json(const ordered_json& j) {
    long rows = j.at("rows").get<long>();
    long cols = j.at("cols").get<long>();
    std::vector<double> data = j.at("data").get<std::vector<double>>();
    if (static_cast<long>(data.size()) != rows * cols)
        throw std::runtime_error("mat_from_json: data length mismatch");
    Mat m(rows, cols);
    std::copy(data.begin(), data.end(), m.data());
    return m;
}

static ordered_json layer_to_json(const AdaptedLinear& l) {
    ordered_json j;
    j["rank"] = l.rank;
    j["w_init"] = mat_to_json(l.w_init);
    j["w_prev"] = mat_to_json(l.w_prev);
    j["changed_mask"] = mat_to_json(l.changed_mask);
    // active adapter (zero-residual between tasks, live mid-task)
    j["adapter"]["a"] = mat_to_json(l.a);
    j["adapter"]["b"] = mat_to_json(l.b);
    j["adapter"]["mask_l1"] = mat_to_json(l.mask_mlp.l1);
    j["adapter"]["mask_l2"] = mat_to_json(l.mask_mlp.l2);
    return j;
}

static AdaptedLinear layer_from_json(const ordered_json& j) {
    AdaptedLinear l;
    l.rank = j.at("rank").get<long>();
    l.w_init = mat_from_json(j.at("w_init"));
    l.w_prev = mat_from_json(j.at("w_prev"));
    l.changed_mask = mat_from_json(j.at("changed_mask"));
    l.a = mat_from_json(j.at("adapter").at("a"));
    l.b = mat_from_json(j.at("adapter").at("b"));
    l.mask_mlp.l1 = mat_from_json(j.at("adapter").at("mask_l1"));
    l.mask_mlp.l2 = mat_from_json(j.at("adapter").at("mask_l2"));
    l.mask_mlp.d1 = l.w_init.rows();
    l.mask_mlp.d2 = l.w_init.cols();
    l.mask_mlp.rank = l.rank;
    return l;
}

ordered_json model_to_json(const ContinualModel& model) {
    ordered_json j;
    j["format"] = "stamina-model-v1";
    j["mode"] = to_string(model.mode);
    j["tasks_completed"] = model.tasks_completed;
    if (model.mode == Mode::denoiser) {
        const ToyDenoiser& d = model.denoiser;
        j["denoiser"]["ctx"] = mat_to_json(d.ctx);
        j["denoiser"]["temb"] = mat_to_json(d.temb);
        j["denoiser"]["alpha_bar"] = d.alpha_bar;
        for (const auto& b : d.blocks) {
            ordered_json bj;
            bj["wq"] = mat_to_json(b.wq);
            bj["wo"] = mat_to_json(b.wo);
            bj["wk"] = layer_to_json(b.wk);
            bj["wv"] = layer_to_json(b.wv);
            j["denoiser"]["blocks"].push_back(bj);
        }
        j["token_mlp"]["l1"] = mat_to_json(model.token_mlp.l1);
        j["token_mlp"]["l2"] = mat_to_json(model.token_mlp.l2);
        j["plain_token"] = mat_to_json(model.plain_token);
        for (const auto& tok : model.concept_tokens)
            j["concept_tokens"].push_back(mat_to_json(tok));
        if (model.concept_tokens.empty()) j["concept_tokens"] = ordered_json::array();
    } else {
        const ToyClassifier& c = model.classifier;
        j["classifier"]["n_classes"] = c.n_classes;
        j["classifier"]["wq"] = layer_to_json(c.wq);
        j["classifier"]["wk"] = layer_to_json(c.wk);
        j["classifier"]["wv"] = layer_to_json(c.wv);
        j["classifier"]["wo"] = mat_to_json(c.wo);
        j["classifier"]["head"] = mat_to_json(c.head);
    }
    for (const auto& dl : model.direct_logits)
        j["direct_logits"].push_back(mat_to_json(dl));
    return j;
}

ContinualModel model_from_json(const ordered_json& j) {
    ContinualModel m;
    m.mode = mode_from_string(j.at("mode").get<std::string>());
    m.tasks_completed = j.at("tasks_completed").get<int>();
    m.next_task = m.tasks_completed + 1;
    if (m.mode == Mode::denoiser) {
        ToyDenoiser& d = m.denoiser;
        d.ctx = mat_from_json(j.at("denoiser").at("ctx"));
        d.temb = mat_from_json(j.at("denoiser").at("temb"));
        d.alpha_bar = j.at("denoiser").at("alpha_bar").get<std::vector<double>>();
        d.blocks.clear();
        for (const auto& bj : j.at("denoiser").at("blocks")) {
            CrossAttnBlock b;
            b.wq = mat_from_json(bj.at("wq"));
            b.wo = mat_from_json(bj.at("wo"));
            b.wk = layer_from_json(bj.at("wk"));
            b.wv = layer_from_json(bj.at("wv"));
            d.blocks.push_back(std::move(b));
        }
        m.token_mlp.l1 = mat_from_json(j.at("token_mlp").at("l1"));
        m.token_mlp.l2 = mat_from_json(j.at("token_mlp").at("l2"));
        m.plain_token = mat_from_json(j.at("plain_token"));
        for (const auto& tj : j.at("concept_tokens"))
            m.concept_tokens.push_back(mat_from_json(tj));
    } else {
        ToyClassifier& c = m.classifier;
        c.n_classes = j.at("classifier").at("n_classes").get<long>();
        c.wq = layer_from_json(j.at("classifier").at("wq"));
        c.wk = layer_from_json(j.at("classifier").at("wk"));
        c.wv = layer_from_json(j.at("classifier").at("wv"));
        c.wo = mat_from_json(j.at("classifier").at("wo"));
        c.head = mat_from_json(j.at("classifier").at("head"));
    }
    if (j.contains("direct_logits"))
        for (const auto& dj : j.at("direct_logits"))
            m.direct_logits.push_back(mat_from_json(dj));
    return m;
}

ordered_json log_to_json(const ContinualLog& log) {
    ordered_json j;
    j["n_tasks"] = log.n_tasks;
    j["trainable_param_pct"] = log.trainable_param_pct;
    j["snapshots"] = ordered_json::array();
    for (const auto& row : log.snapshots) {
        ordered_json r = ordered_json::array();
        for (const auto& m : row) r.push_back(mat_to_json(m));
        j["snapshots"].push_back(r);
    }
    j["interference_counts"] = ordered_json::array();
    for (const auto& task : log.interference_counts) {
        ordered_json r = ordered_json::array();
        for (const auto& [fresh, support] : task) r.push_back({fresh, support});
        j["interference_counts"].push_back(r);
    }
    j["weight_dist"] = log.weight_dist;
    j["loss_curves"] = log.loss_curves;
    j["accuracy"] = log.accuracy;
    return j;
}

ContinualLog log_from_json(const ordered_json& j) {
    ContinualLog log;
    log.n_tasks = j.at("n_tasks").get<int>();
    log.trainable_param_pct = j.at("trainable_param_pct").get<double>();
    for (const auto& row : j.at("snapshots")) {
        std::vector<Mat> r;
        for (const auto& m : row) r.push_back(mat_from_json(m));
        log.snapshots.push_back(std::move(r));
    }
    for (const auto& task : j.at("interference_counts")) {
        std::vector<std::pair<long, long>> r;
        for (const auto& p : task) r.emplace_back(p.at(0).get<long>(), p.at(1).get<long>());
        log.interference_counts.push_back(std::move(r));
    }
    log.weight_dist = j.at("weight_dist").get<std::vector<std::vector<double>>>();
    log.loss_curves = j.at("loss_curves").get<std::vector<std::vector<double>>>();
    log.accuracy = j.at("accuracy").get<std::vector<std::vector<double>>>();
    return log;
}

ordered_json checkpoint_to_json(const ContinualModel& model, const ContinualLog& log,
                                const std::string& config_hash) {
    ordered_json j;
    j["format"] = "stamina-checkpoint-v1";
    j["config_hash"] = config_hash;
    j["model"] = model_to_json(model);
    j["log"] = log_to_json(log);
    return j;
}

void write_json_file(const std::string& path, const ordered_json& j) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << j.dump(1) << "\n";
    if (!f) throw std::runtime_error("write failed: " + path);
}

ordered_json read_json_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path);
    return ordered_json::parse(f);
}

}  // namespace stamina
