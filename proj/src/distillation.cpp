#include "feddm/distillation.hpp"

#include <algorithm>
#include <cmath>

#include "feddm/errors.hpp"

namespace feddm {

std::vector<double> SyntheticSet::class_values(int ci) const {
    const int dim = input_dim();
    const std::size_t off = static_cast<std::size_t>(ci) * ipc * dim;
    return {values.begin() + off, values.begin() + off + static_cast<std::size_t>(ipc) * dim};
}

void SyntheticSet::set_class_values(int ci, const std::vector<double>& v) {
    const int dim = input_dim();
    const std::size_t off = static_cast<std::size_t>(ci) * ipc * dim;
    std::copy(v.begin(), v.end(), values.begin() + off);
}

void ClientConfig::validate() const {
    if (match_iters < 0) throw ConfigError("client config: match_iters must be >= 0");
    if (!(eta_c > 0.0)) throw ConfigError("client config: eta_c must be positive");
    if (real_batch < 1) throw ConfigError("client config: real_batch must be >= 1");
    if (ipc < 1) throw ConfigError("client config: ipc must be >= 1");
    if (rho < 0.0) throw ConfigError("client config: rho must be non-negative");
    if (sigma < 0.0) throw ConfigError("client config: sigma must be non-negative");
    if (sigma > 0.0 && !(clip > 0.0)) {
        throw ConfigError("client config: clip must be positive when sigma > 0");
    }
}

SyntheticSet init_synthetic(const DatasetView& client_data, int ipc, std::uint64_t seed) {
    if (client_data.size() == 0) throw DataError("init_synthetic: empty client data");
    if (ipc < 1) throw ConfigError("init_synthetic: ipc must be >= 1");
    SyntheticSet syn;
    syn.ipc = ipc;
    syn.example_shape = client_data.data->example_shape;
    syn.classes = client_data.present_classes();
    Rng rng(derive_seed({seed, 0x53594eULL}));
    for (int c : syn.classes) {
        const std::vector<int> picks = sample_class_batch(client_data, c, ipc, rng);
        const std::vector<double> x = client_data.gather(picks);
        syn.values.insert(syn.values.end(), x.begin(), x.end());
        syn.labels.insert(syn.labels.end(), ipc, c);
    }
    return syn;
}

namespace {

int class_slot(const SyntheticSet& syn, int label) {
    const auto it = std::lower_bound(syn.classes.begin(), syn.classes.end(), label);
    if (it == syn.classes.end() || *it != label) {
        throw DataError("distribution matching: class " + std::to_string(label) +
                        " has no synthetic examples");
    }
    return static_cast<int>(it - syn.classes.begin());
}

// Column means of the embedding and logit outputs for a constant batch.
void real_feature_means(const Model& model, const ClassBatch& batch,
                        std::vector<double>& mean_h, std::vector<double>& mean_z) {
    const ForwardPass fp = model.forward(batch.x, batch.count, false, false);
    const int eh = model.embed_dim(), ez = model.num_classes();
    mean_h.assign(eh, 0.0);
    mean_z.assign(ez, 0.0);
    for (int i = 0; i < batch.count; ++i) {
        for (int j = 0; j < eh; ++j) mean_h[j] += fp.embed.values()[i * eh + j];
        for (int j = 0; j < ez; ++j) mean_z[j] += fp.logits.values()[i * ez + j];
    }
    for (double& v : mean_h) v /= batch.count;
    for (double& v : mean_z) v /= batch.count;
}

// Matching term for one class against fixed target means.
Tensor class_match_loss(const Model& model, const std::vector<double>& syn_x, int syn_n,
                        const std::vector<double>& target_h, const std::vector<double>& target_z,
                        Tensor* syn_input_out) {
    const ForwardPass fp = model.forward(syn_x, syn_n, false, true);
    if (syn_input_out != nullptr) *syn_input_out = fp.input;
    const int eh = model.embed_dim(), ez = model.num_classes();
    Tensor diff_h = sub(mean_rows(fp.embed), Tensor::constant({eh}, target_h));
    Tensor diff_z = sub(mean_rows(fp.logits), Tensor::constant({ez}, target_z));
    return add(sqnorm(diff_h), sqnorm(diff_z));
}

}  // namespace

DmLossGraph build_dm_loss(const Model& model_at_w,
                          const std::vector<ClassBatch>& real_batches,
                          const SyntheticSet& syn) {
    DmLossGraph g;
    g.syn_inputs.assign(syn.classes.size(), Tensor());
    Tensor total;
    std::vector<double> mh, mz;
    for (const ClassBatch& batch : real_batches) {
        if (batch.count < 1) throw DataError("dm_loss: empty real batch");
        const int ci = class_slot(syn, batch.label);
        real_feature_means(model_at_w, batch, mh, mz);
        Tensor syn_input;
        Tensor lc = class_match_loss(model_at_w, syn.class_values(ci), syn.ipc, mh, mz, &syn_input);
        g.syn_inputs[ci] = syn_input;
        total = total.defined() ? add(total, lc) : lc;
    }
    if (!total.defined()) throw DataError("dm_loss: no real batches given");
    g.loss = total;
    return g;
}

double dm_loss(const Model& model_at_w, const std::vector<ClassBatch>& real_batches,
               const SyntheticSet& syn) {
    return build_dm_loss(model_at_w, real_batches, syn).loss.item();
}

std::vector<double> dm_loss_grad(const Model& model_at_w,
                                 const std::vector<ClassBatch>& real_batches,
                                 const SyntheticSet& syn) {
    const DmLossGraph g = build_dm_loss(model_at_w, real_batches, syn);
    backward(g.loss);
    const int dim = syn.input_dim();
    std::vector<double> grad(syn.values.size(), 0.0);
    for (std::size_t ci = 0; ci < g.syn_inputs.size(); ++ci) {
        if (!g.syn_inputs[ci].defined()) continue;
        const auto& ig = g.syn_inputs[ci].node()->grad;
        if (ig.empty()) continue;
        std::copy(ig.begin(), ig.end(),
                  grad.begin() + static_cast<std::size_t>(ci) * syn.ipc * dim);
    }
    return grad;
}

std::vector<std::vector<double>> per_example_grads(const Model& model_at_w,
                                                   const ClassBatch& real_batch,
                                                   const SyntheticSet& syn) {
    if (real_batch.count < 1) throw DataError("per_example_grads: empty real batch");
    const int ci = class_slot(syn, real_batch.label);
    const std::vector<double> syn_x = syn.class_values(ci);
    const int dim = syn.input_dim();

    std::vector<std::vector<double>> grads;
    grads.reserve(real_batch.count);
    for (int i = 0; i < real_batch.count; ++i) {
        // g~(x_i): real-batch means replaced by the single example's features.
        ClassBatch one;
        one.label = real_batch.label;
        one.count = 1;
        one.x.assign(real_batch.x.begin() + static_cast<std::size_t>(i) * dim,
                     real_batch.x.begin() + static_cast<std::size_t>(i + 1) * dim);
        std::vector<double> hi, zi;
        real_feature_means(model_at_w, one, hi, zi);
        Tensor syn_input;
        Tensor li = class_match_loss(model_at_w, syn_x, syn.ipc, hi, zi, &syn_input);
        backward(li);
        grads.push_back(syn_input.node()->grad);
    }
    return grads;
}

SyntheticSet client_update(const DatasetView& client_data, const ParamVector& w_r,
                           const Model& prototype, const ClientConfig& cfg,
                           std::uint64_t seed) {
    cfg.validate();
    SyntheticSet syn = init_synthetic(client_data, cfg.ipc, derive_seed({seed, 1}));
    Rng rng(derive_seed({seed, 2}));
    Model model = prototype;
    const int dim = syn.input_dim();
    std::normal_distribution<double> unit(0.0, 1.0);

    for (int t = 0; t < cfg.match_iters; ++t) {
        model.set_params(sample_ball_weight(w_r, cfg.rho, rng));

        std::vector<ClassBatch> real_batches;
        real_batches.reserve(syn.classes.size());
        for (int c : syn.classes) {
            ClassBatch b;
            b.label = c;
            const std::vector<int> picks = sample_class_batch(client_data, c, cfg.real_batch, rng);
            b.count = static_cast<int>(picks.size());
            b.x = client_data.gather(picks);
            real_batches.push_back(std::move(b));
        }

        std::vector<double> grad;
        if (cfg.sigma > 0.0) {
            // DP-SGD branch: clip each per-example gradient, average, add
            // Gaussian noise with per-coordinate std sigma*clip/|B_c|.
            grad.assign(syn.values.size(), 0.0);
            for (const ClassBatch& b : real_batches) {
                const int ci = class_slot(syn, b.label);
                const auto per_ex = per_example_grads(model, b, syn);
                std::vector<double> avg(static_cast<std::size_t>(syn.ipc) * dim, 0.0);
                for (const auto& g : per_ex) {
                    const std::vector<double> clipped = clip_by_norm(g, cfg.clip);
                    for (std::size_t j = 0; j < avg.size(); ++j) avg[j] += clipped[j];
                }
                const double noise_std = cfg.sigma * cfg.clip / b.count;
                for (std::size_t j = 0; j < avg.size(); ++j) {
                    avg[j] = avg[j] / b.count + noise_std * unit(rng);
                }
                std::copy(avg.begin(), avg.end(),
                          grad.begin() + static_cast<std::size_t>(ci) * syn.ipc * dim);
            }
        } else {
            grad = dm_loss_grad(model, real_batches, syn);
        }
        check_finite(grad, "synthetic gradient");
        syn.values = sgd_step(syn.values, grad, cfg.eta_c);
    }
    return syn;
}

}  // namespace feddm
