#include "feddm/model.hpp"

#include <algorithm>
#include <cmath>

#include "feddm/errors.hpp"

namespace feddm {

namespace {

struct ConvDims {
    std::vector<int> heights;  // per-block input heights
    std::vector<int> widths;
    std::vector<int> in_channels;
    int flat = 0;  // embedding dimension after the last pool
};

ConvDims conv_dims(const ConvNetLiteSpec& s) {
    ConvDims d;
    int h = s.height, w = s.width, c = s.in_ch;
    for (int ch : s.channels) {
        d.heights.push_back(h);
        d.widths.push_back(w);
        d.in_channels.push_back(c);
        h /= 2;  // conv keeps spatial size (pad 1); pool halves it
        w /= 2;
        c = ch;
        if (h == 0 || w == 0) {
            throw NumericsError("convnet-lite: input too small for three pooling stages");
        }
    }
    d.flat = c * h * w;
    return d;
}

}  // namespace

int param_count(const ModelSpec& spec) {
    if (std::holds_alternative<Logistic1dSpec>(spec)) return 1;
    if (const auto* mlp = std::get_if<MlpSpec>(&spec)) {
        int n = 0;
        for (std::size_t i = 0; i + 1 < mlp->widths.size(); ++i) {
            n += mlp->widths[i] * mlp->widths[i + 1] + mlp->widths[i + 1];
        }
        return n;
    }
    const auto& cv = std::get<ConvNetLiteSpec>(spec);
    const ConvDims d = conv_dims(cv);
    int n = 0;
    for (std::size_t i = 0; i < cv.channels.size(); ++i) {
        n += cv.channels[i] * d.in_channels[i] * 9 + cv.channels[i];
    }
    n += d.flat * cv.num_classes + cv.num_classes;
    return n;
}

Model Model::make(const ModelSpec& spec, std::uint64_t seed) {
    Model m;
    m.spec_ = spec;
    m.params_.assign(feddm::param_count(spec), 0.0);
    Rng rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    if (std::holds_alternative<Logistic1dSpec>(spec)) {
        m.num_classes_ = 2;
        m.embed_dim_ = 1;
        m.input_dim_ = 1;
        // single weight initialized at zero
    } else if (const auto* mlp = std::get_if<MlpSpec>(&spec)) {
        if (mlp->widths.size() < 2) throw NumericsError("mlp: need at least input and output widths");
        m.num_classes_ = mlp->widths.back();
        m.embed_dim_ = mlp->widths[mlp->widths.size() - 2];
        m.input_dim_ = mlp->widths.front();
        std::size_t off = 0;
        for (std::size_t i = 0; i + 1 < mlp->widths.size(); ++i) {
            const int fan_in = mlp->widths[i];
            const double std_dev = std::sqrt(2.0 / fan_in);
            for (int j = 0; j < fan_in * mlp->widths[i + 1]; ++j) {
                m.params_[off++] = std_dev * gauss(rng);
            }
            off += mlp->widths[i + 1];  // biases stay zero
        }
    } else {
        const auto& cv = std::get<ConvNetLiteSpec>(spec);
        const ConvDims d = conv_dims(cv);
        m.num_classes_ = cv.num_classes;
        m.embed_dim_ = d.flat;
        m.input_dim_ = cv.in_ch * cv.height * cv.width;
        std::size_t off = 0;
        for (std::size_t i = 0; i < cv.channels.size(); ++i) {
            const int fan_in = d.in_channels[i] * 9;
            const double std_dev = std::sqrt(2.0 / fan_in);
            for (int j = 0; j < cv.channels[i] * fan_in; ++j) m.params_[off++] = std_dev * gauss(rng);
            off += cv.channels[i];
        }
        const double std_dev = std::sqrt(1.0 / d.flat);
        for (int j = 0; j < d.flat * cv.num_classes; ++j) m.params_[off++] = std_dev * gauss(rng);
    }
    return m;
}

void Model::set_params(ParamVector p) {
    if (p.size() != params_.size()) throw NumericsError("set_params: dimension mismatch");
    params_ = std::move(p);
}

ForwardPass Model::forward(const std::vector<double>& batch, int batch_n,
                           bool params_grad, bool input_grad) const {
    if (static_cast<std::int64_t>(batch.size()) != static_cast<std::int64_t>(batch_n) * input_dim_) {
        throw NumericsError("forward: batch shape mismatch");
    }
    ForwardPass fp;
    fp.input = input_grad ? Tensor::variable({batch_n, input_dim_}, batch)
                          : Tensor::constant({batch_n, input_dim_}, batch);

    auto slice = [&](std::size_t off, Shape shape) {
        const std::int64_t n = numel(shape);
        std::vector<double> v(params_.begin() + off, params_.begin() + off + n);
        Tensor t = params_grad ? Tensor::variable(std::move(shape), std::move(v))
                               : Tensor::constant(std::move(shape), std::move(v));
        fp.params.push_back(t);
        return t;
    };

    if (std::holds_alternative<Logistic1dSpec>(spec_)) {
        Tensor w = slice(0, {1, 1});
        fp.embed = fp.input;
        Tensor z1 = matmul(fp.input, w);
        fp.logits = hstack(Tensor::zeros({batch_n, 1}), z1);
    } else if (const auto* mlp = std::get_if<MlpSpec>(&spec_)) {
        Tensor h = fp.input;
        std::size_t off = 0;
        const std::size_t layers = mlp->widths.size() - 1;
        for (std::size_t i = 0; i < layers; ++i) {
            const int in = mlp->widths[i], out = mlp->widths[i + 1];
            Tensor w = slice(off, {in, out});
            off += static_cast<std::size_t>(in) * out;
            Tensor b = slice(off, {out});
            off += out;
            Tensor z = add_rowvec(matmul(h, w), b);
            if (i + 1 < layers) {
                h = relu(z);
            } else {
                fp.embed = h;
                fp.logits = z;
            }
        }
    } else {
        const auto& cv = std::get<ConvNetLiteSpec>(spec_);
        const ConvDims d = conv_dims(cv);
        Tensor h = fp.input;
        std::size_t off = 0;
        for (std::size_t i = 0; i < cv.channels.size(); ++i) {
            const int ic = d.in_channels[i], oc = cv.channels[i];
            Tensor w = slice(off, {oc * ic * 9});
            off += static_cast<std::size_t>(oc) * ic * 9;
            Tensor b = slice(off, {oc});
            off += oc;
            h = conv2d(h, w, b, ic, d.heights[i], d.widths[i], oc, 3, 1);
            h = relu(h);
            h = avgpool2(h, oc, d.heights[i], d.widths[i]);
        }
        fp.embed = h;
        Tensor w = slice(off, {d.flat, cv.num_classes});
        off += static_cast<std::size_t>(d.flat) * cv.num_classes;
        Tensor b = slice(off, {cv.num_classes});
        fp.logits = add_rowvec(matmul(h, w), b);
    }
    return fp;
}

ParamVector Model::collect_param_grads(const ForwardPass& fp) const {
    ParamVector g;
    g.reserve(params_.size());
    for (const auto& t : fp.params) {
        const auto& pg = t.node()->grad;
        if (pg.empty()) {
            g.insert(g.end(), static_cast<std::size_t>(t.size()), 0.0);
        } else {
            g.insert(g.end(), pg.begin(), pg.end());
        }
    }
    if (g.size() != params_.size()) throw NumericsError("collect_param_grads: size mismatch");
    return g;
}

std::vector<double> Model::eval_logits(const std::vector<double>& batch, int batch_n) const {
    return forward(batch, batch_n, false, false).logits.values();
}

double Model::accuracy(const Dataset& dataset) const {
    if (dataset.size() == 0) throw DataError("accuracy: empty dataset");
    const int n = dataset.size();
    const int c = num_classes_;
    int correct = 0;
    constexpr int kChunk = 512;
    for (int start = 0; start < n; start += kChunk) {
        const int m = std::min(kChunk, n - start);
        std::vector<double> batch(dataset.examples.begin() + static_cast<std::size_t>(start) * input_dim_,
                                  dataset.examples.begin() + static_cast<std::size_t>(start + m) * input_dim_);
        const std::vector<double> z = eval_logits(batch, m);
        for (int i = 0; i < m; ++i) {
            int best = 0;
            for (int j = 1; j < c; ++j) {
                if (z[i * c + j] > z[i * c + best]) best = j;
            }
            if (best == dataset.labels[start + i]) ++correct;
        }
    }
    return static_cast<double>(correct) / n;
}

}  // namespace feddm
