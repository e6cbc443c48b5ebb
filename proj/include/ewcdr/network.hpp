#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ewcdr/errors.hpp"
#include "ewcdr/tensor.hpp"

namespace ewcdr {

// Shape of one named parameter block. Vector blocks (biases) keep cols == 1
// and is_matrix == false so CSV export can tell them apart.
struct BlockShape {
    std::size_t rows = 0;
    std::size_t cols = 0;
    bool is_matrix = false;

    std::size_t count() const { return is_matrix ? rows * cols : rows; }
    bool operator==(const BlockShape&) const = default;
};

struct ParamView {
    std::string name;
    BlockShape shape;
    double* data;
};

struct ConstParamView {
    std::string name;
    BlockShape shape;
    const double* data;
};

// Fully connected ReLU classifier: zero or more hidden layers, then a linear
// head "fc.weight" whose row count is the number of classes seen so far.
// The head bias is optional and absent by default; hidden layers always carry
// biases. Parameter block names follow hidden0.weight, hidden0.bias, ...,
// fc.weight[, fc.bias].
class Network {
public:
    struct HiddenLayer {
        Tensor2 weight;
        Tensor1 bias;

        bool operator==(const HiddenLayer&) const = default;
    };

    Network() = default;

    // Zero-initialized body with an empty head (0 classes).
    Network(std::size_t input_dim, const std::vector<std::size_t>& hidden_widths)
        : input_dim_(input_dim) {
        if (input_dim == 0) throw validation_error("network: input_dim must be positive");
        std::size_t in = input_dim;
        for (std::size_t w : hidden_widths) {
            if (w == 0) throw validation_error("network: hidden width must be positive");
            hidden_.push_back({Tensor2(w, in), Tensor1(w)});
            in = w;
        }
        fc_weight_ = Tensor2(0, in);
    }

    // Same topology but hidden weights drawn uniform in +-1/sqrt(fan_in),
    // biases zero. The head starts empty; expand_head adds class rows.
    static Network seeded(std::size_t input_dim, const std::vector<std::size_t>& hidden_widths,
                          std::mt19937_64& rng) {
        Network net(input_dim, hidden_widths);
        for (auto& layer : net.hidden_) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(layer.weight.cols));
            std::uniform_real_distribution<double> u(-bound, bound);
            for (double& v : layer.weight.data) v = u(rng);
        }
        return net;
    }

    std::size_t input_dim() const { return input_dim_; }
    std::size_t num_classes() const { return fc_weight_.rows; }
    std::size_t head_in_dim() const { return fc_weight_.cols; }

    std::vector<HiddenLayer>& hidden() { return hidden_; }
    const std::vector<HiddenLayer>& hidden() const { return hidden_; }

    Tensor2& fc_weight() { return fc_weight_; }
    const Tensor2& fc_weight() const { return fc_weight_; }

    std::optional<Tensor1>& fc_bias() { return fc_bias_; }
    const std::optional<Tensor1>& fc_bias() const { return fc_bias_; }

    // Turns on the optional head bias (zeros, one entry per class row).
    void enable_fc_bias() {
        if (!fc_bias_) fc_bias_ = Tensor1(fc_weight_.rows);
    }

    std::vector<ParamView> param_blocks() {
        std::vector<ParamView> out;
        for (std::size_t i = 0; i < hidden_.size(); ++i) {
            auto& l = hidden_[i];
            out.push_back({"hidden" + std::to_string(i) + ".weight",
                           {l.weight.rows, l.weight.cols, true}, l.weight.data.data()});
            out.push_back({"hidden" + std::to_string(i) + ".bias",
                           {l.bias.size(), 1, false}, l.bias.data.data()});
        }
        out.push_back({"fc.weight", {fc_weight_.rows, fc_weight_.cols, true},
                       fc_weight_.data.data()});
        if (fc_bias_)
            out.push_back({"fc.bias", {fc_bias_->size(), 1, false}, fc_bias_->data.data()});
        return out;
    }

    std::vector<ConstParamView> param_blocks() const {
        std::vector<ConstParamView> out;
        for (std::size_t i = 0; i < hidden_.size(); ++i) {
            const auto& l = hidden_[i];
            out.push_back({"hidden" + std::to_string(i) + ".weight",
                           {l.weight.rows, l.weight.cols, true}, l.weight.data.data()});
            out.push_back({"hidden" + std::to_string(i) + ".bias",
                           {l.bias.size(), 1, false}, l.bias.data.data()});
        }
        out.push_back({"fc.weight", {fc_weight_.rows, fc_weight_.cols, true},
                       fc_weight_.data.data()});
        if (fc_bias_)
            out.push_back({"fc.bias", {fc_bias_->size(), 1, false}, fc_bias_->data.data()});
        return out;
    }

    bool operator==(const Network&) const = default;

private:
    std::size_t input_dim_ = 0;
    std::vector<HiddenLayer> hidden_;
    Tensor2 fc_weight_;
    std::optional<Tensor1> fc_bias_;
};

// Named copies of every parameter-sized array: gradients, parameter
// snapshots, importance values. Blocks keep the network's iteration order but
// lookups go by name, so consumers never depend on ordering.
class BlockValues {
public:
    struct Block {
        std::string name;
        BlockShape shape;
        std::vector<double> values;

        bool operator==(const Block&) const = default;
    };

    BlockValues() = default;

    static BlockValues zeros_like(const Network& net) {
        BlockValues out;
        for (const auto& p : net.param_blocks())
            out.blocks_.push_back({p.name, p.shape, std::vector<double>(p.shape.count(), 0.0)});
        return out;
    }

    static BlockValues snapshot(const Network& net) {
        BlockValues out;
        for (const auto& p : net.param_blocks())
            out.blocks_.push_back(
                {p.name, p.shape, std::vector<double>(p.data, p.data + p.shape.count())});
        return out;
    }

    std::vector<Block>& blocks() { return blocks_; }
    const std::vector<Block>& blocks() const { return blocks_; }

    const Block* find(std::string_view name) const {
        for (const auto& b : blocks_)
            if (b.name == name) return &b;
        return nullptr;
    }

    Block* find(std::string_view name) {
        for (auto& b : blocks_)
            if (b.name == name) return &b;
        return nullptr;
    }

    const Block& at(std::string_view name) const {
        const Block* b = find(name);
        if (!b) throw validation_error("block '" + std::string(name) + "' not present");
        return *b;
    }

    Block& at(std::string_view name) {
        Block* b = find(name);
        if (!b) throw validation_error("block '" + std::string(name) + "' not present");
        return *b;
    }

    std::size_t total_count() const {
        std::size_t n = 0;
        for (const auto& b : blocks_) n += b.values.size();
        return n;
    }

    // this[i] = f(this[i], other[i]) over every entry, matched by block name.
    template <class F>
    void zip_apply(const BlockValues& other, F&& f) {
        if (blocks_.size() != other.blocks_.size())
            throw shape_error("block sets differ in block count");
        for (std::size_t i = 0; i < blocks_.size(); ++i) {
            const Block& o = other.blocks_[i].name == blocks_[i].name
                                 ? other.blocks_[i]
                                 : other.at(blocks_[i].name);
            if (o.shape != blocks_[i].shape)
                throw shape_error("block '" + blocks_[i].name + "' differs in shape");
            for (std::size_t k = 0; k < blocks_[i].values.size(); ++k)
                blocks_[i].values[k] = f(blocks_[i].values[k], o.values[k]);
        }
    }

    void add_scaled(const BlockValues& other, double a) {
        zip_apply(other, [a](double x, double y) { return x + a * y; });
    }

    void scale(double a) {
        for (auto& b : blocks_)
            for (double& v : b.values) v *= a;
    }

    // Writes the stored values back into a network with identical block layout.
    void apply_to(Network& net) const {
        auto params = net.param_blocks();
        if (params.size() != blocks_.size())
            throw shape_error("parameter assignment: block count mismatch");
        for (auto& p : params) {
            const Block& b = at(p.name);
            if (b.shape != p.shape)
                throw shape_error("parameter assignment: block '" + p.name + "' shape mismatch");
            std::copy(b.values.begin(), b.values.end(), p.data);
        }
    }

    static BlockValues diff(const BlockValues& a, const BlockValues& b) {
        BlockValues out = a;
        out.zip_apply(b, [](double x, double y) { return x - y; });
        return out;
    }

    bool operator==(const BlockValues&) const = default;

private:
    std::vector<Block> blocks_;
};

using GradientSet = BlockValues;

struct ForwardCache {
    Tensor1 input;
    std::vector<Tensor1> pre;   // hidden pre-activations
    std::vector<Tensor1> post;  // hidden activations after ReLU
    Tensor1 logits;

    const Tensor1& head_input() const { return post.empty() ? input : post.back(); }
};

inline ForwardCache forward(const Network& net, const Tensor1& x) {
    if (x.size() != net.input_dim())
        throw shape_error("forward: input length " + std::to_string(x.size()) + ", expected " +
                          std::to_string(net.input_dim()));
    ForwardCache cache;
    cache.input = x;
    cache.pre.reserve(net.hidden().size());
    cache.post.reserve(net.hidden().size());
    const Tensor1* cur = &cache.input;
    for (const auto& layer : net.hidden()) {
        Tensor1 a = matvec(layer.weight, *cur);
        for (std::size_t i = 0; i < a.size(); ++i) a[i] += layer.bias[i];
        Tensor1 h(a.size());
        // ReLU; the derivative at exactly 0 is taken as 0.
        for (std::size_t i = 0; i < a.size(); ++i) h[i] = a[i] > 0.0 ? a[i] : 0.0;
        cache.pre.push_back(std::move(a));
        cache.post.push_back(std::move(h));
        cur = &cache.post.back();
    }
    cache.logits = matvec(net.fc_weight(), *cur);
    if (net.fc_bias())
        for (std::size_t i = 0; i < cache.logits.size(); ++i)
            cache.logits[i] += (*net.fc_bias())[i];
    return cache;
}

inline Tensor1 one_hot(std::size_t num_classes, std::size_t label) {
    if (label >= num_classes)
        throw validation_error("one_hot: label " + std::to_string(label) + " with " +
                               std::to_string(num_classes) + " classes");
    Tensor1 y(num_classes);
    y[label] = 1.0;
    return y;
}

inline std::size_t one_hot_index(const Tensor1& y) {
    std::size_t idx = y.size();
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] == 1.0) {
            if (idx != y.size()) throw validation_error("one_hot_index: multiple entries set");
            idx = i;
        } else if (y[i] != 0.0) {
            throw validation_error("one_hot_index: entries must be exactly 0 or 1");
        }
    }
    if (idx == y.size()) throw validation_error("one_hot_index: no entry set");
    return idx;
}

// Backpropagates an arbitrary logit gradient through the cached activations.
// All three losses below reduce to a choice of dL/dz, so they share this.
inline GradientSet backward_from_logit_grad(const Network& net, const ForwardCache& cache,
                                            const Tensor1& dlogits) {
    if (dlogits.size() != net.num_classes())
        throw shape_error("backward: logit gradient length mismatch");
    if (cache.post.size() != net.hidden().size() || cache.input.size() != net.input_dim())
        throw shape_error("backward: cache does not match network");
    GradientSet g = BlockValues::zeros_like(net);

    const Tensor1& hin = cache.head_input();
    {
        auto& blk = g.at("fc.weight");
        for (std::size_t r = 0; r < dlogits.size(); ++r)
            for (std::size_t c = 0; c < hin.size(); ++c)
                blk.values[r * hin.size() + c] = dlogits[r] * hin[c];
    }
    if (net.fc_bias()) g.at("fc.bias").values = dlogits.data;

    Tensor1 dh = matvec_transposed(net.fc_weight(), dlogits);
    for (std::size_t li = net.hidden().size(); li-- > 0;) {
        const auto& layer = net.hidden()[li];
        Tensor1 da(dh.size());
        for (std::size_t i = 0; i < dh.size(); ++i)
            da[i] = cache.pre[li][i] > 0.0 ? dh[i] : 0.0;
        const Tensor1& lin = li == 0 ? cache.input : cache.post[li - 1];
        const std::string prefix = "hidden" + std::to_string(li);
        auto& wblk = g.at(prefix + ".weight");
        for (std::size_t r = 0; r < da.size(); ++r)
            for (std::size_t c = 0; c < lin.size(); ++c)
                wblk.values[r * lin.size() + c] = da[r] * lin[c];
        g.at(prefix + ".bias").values = da.data;
        dh = matvec_transposed(layer.weight, da);
    }
    return g;
}

// Cross-entropy over the logits: dL/dz = softmax(z) - y.
inline GradientSet grad_ce(const Network& net, const ForwardCache& cache, const Tensor1& y) {
    if (y.size() != net.num_classes())
        throw shape_error("grad_ce: target length " + std::to_string(y.size()) + ", expected " +
                          std::to_string(net.num_classes()));
    one_hot_index(y);
    Tensor1 p = softmax(cache.logits);
    Tensor1 dz(p.size());
    for (std::size_t k = 0; k < p.size(); ++k) dz[k] = p[k] - y[k];
    return backward_from_logit_grad(net, cache, dz);
}

// Cross-entropy evaluated on negated logits: dL/dz = y - softmax(-z). The
// gradient is large exactly where the standard one has collapsed, which is
// what makes the resulting importance estimates survive high confidence.
inline GradientSet grad_ce_reversed(const Network& net, const ForwardCache& cache,
                                    const Tensor1& y) {
    if (y.size() != net.num_classes())
        throw shape_error("grad_ce_reversed: target length " + std::to_string(y.size()) +
                          ", expected " + std::to_string(net.num_classes()));
    one_hot_index(y);
    Tensor1 pt = softmax(negated(cache.logits));
    Tensor1 dz(pt.size());
    for (std::size_t k = 0; k < pt.size(); ++k) dz[k] = y[k] - pt[k];
    return backward_from_logit_grad(net, cache, dz);
}

// Gradient of the squared-l2 output surrogate L = ||z||_2: dL/dz = z / ||z||,
// defined as the zero vector when the logits vanish.
inline GradientSet grad_l2out(const Network& net, const ForwardCache& cache) {
    const double n = l2_norm(cache.logits);
    Tensor1 dz(cache.logits.size());
    if (n != 0.0)
        for (std::size_t k = 0; k < dz.size(); ++k) dz[k] = cache.logits[k] / n;
    return backward_from_logit_grad(net, cache, dz);
}

// Scalar losses matching the three gradients above, for finite-difference checks.
inline double loss_ce(const Tensor1& logits, std::size_t label) {
    if (label >= logits.size()) throw validation_error("loss_ce: label out of range");
    return -logits[label] + log_sum_exp(logits);
}

inline double loss_ce_reversed(const Tensor1& logits, std::size_t label) {
    if (label >= logits.size()) throw validation_error("loss_ce_reversed: label out of range");
    return logits[label] + log_sum_exp(negated(logits));
}

inline double loss_l2out(const Tensor1& logits) { return l2_norm(logits); }

// Returns a copy with `new_classes` extra head rows appended. Fresh rows (and
// bias entries, when the head has a bias) are drawn uniform in
// +-init_scale; existing parameters are copied bit for bit. Expanding by 0 is
// a no-op, which keeps single-task streams uniform.
inline Network expand_head(const Network& net, std::size_t new_classes, double init_scale,
                           std::mt19937_64& rng) {
    if (init_scale < 0.0) throw validation_error("expand_head: init_scale must be >= 0");
    Network out = net;
    if (new_classes == 0) return out;
    const std::size_t old_rows = net.fc_weight().rows;
    const std::size_t cols = net.fc_weight().cols;
    Tensor2 w(old_rows + new_classes, cols);
    std::copy(net.fc_weight().data.begin(), net.fc_weight().data.end(), w.data.begin());
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (std::size_t r = old_rows; r < w.rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) w(r, c) = init_scale * u(rng);
    out.fc_weight() = std::move(w);
    if (out.fc_bias()) {
        Tensor1 b(old_rows + new_classes);
        std::copy(net.fc_bias()->data.begin(), net.fc_bias()->data.end(), b.data.begin());
        for (std::size_t r = old_rows; r < b.size(); ++r) b[r] = init_scale * u(rng);
        out.fc_bias() = std::move(b);
    }
    return out;
}

// JSON round-trips are exact: nlohmann serializes doubles with shortest
// round-trip formatting, so save/load reproduces every bit.
inline nlohmann::json to_json(const Network& net) {
    nlohmann::json j;
    j["input_dim"] = net.input_dim();
    j["hidden"] = nlohmann::json::array();
    for (const auto& layer : net.hidden()) {
        nlohmann::json l;
        l["rows"] = layer.weight.rows;
        l["cols"] = layer.weight.cols;
        l["weight"] = layer.weight.data;
        l["bias"] = layer.bias.data;
        j["hidden"].push_back(std::move(l));
    }
    j["fc_rows"] = net.fc_weight().rows;
    j["fc_cols"] = net.fc_weight().cols;
    j["fc_weight"] = net.fc_weight().data;
    if (net.fc_bias())
        j["fc_bias"] = net.fc_bias()->data;
    else
        j["fc_bias"] = nullptr;
    return j;
}

inline Network network_from_json(const nlohmann::json& j) {
    try {
        std::vector<std::size_t> widths;
        for (const auto& l : j.at("hidden")) widths.push_back(l.at("rows").get<std::size_t>());
        Network net(j.at("input_dim").get<std::size_t>(), widths);
        for (std::size_t i = 0; i < widths.size(); ++i) {
            const auto& l = j.at("hidden")[i];
            auto& layer = net.hidden()[i];
            if (l.at("cols").get<std::size_t>() != layer.weight.cols)
                throw validation_error("network json: hidden layer shape chain broken");
            layer.weight.data = l.at("weight").get<std::vector<double>>();
            layer.bias.data = l.at("bias").get<std::vector<double>>();
            if (layer.weight.data.size() != layer.weight.rows * layer.weight.cols ||
                layer.bias.data.size() != layer.weight.rows)
                throw validation_error("network json: hidden layer payload size mismatch");
        }
        Tensor2 w(j.at("fc_rows").get<std::size_t>(), j.at("fc_cols").get<std::size_t>());
        w.data = j.at("fc_weight").get<std::vector<double>>();
        if (w.data.size() != w.rows * w.cols)
            throw validation_error("network json: head payload size mismatch");
        if (w.cols != net.head_in_dim())
            throw validation_error("network json: head width does not match body");
        net.fc_weight() = std::move(w);
        if (!j.at("fc_bias").is_null()) {
            Tensor1 b;
            b.data = j.at("fc_bias").get<std::vector<double>>();
            if (b.size() != net.fc_weight().rows)
                throw validation_error("network json: head bias length mismatch");
            net.fc_bias() = std::move(b);
        }
        return net;
    } catch (const nlohmann::json::exception& e) {
        throw format_error(std::string("network json: ") + e.what());
    }
}

}  // namespace ewcdr
