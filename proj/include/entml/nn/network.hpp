#pragma once

// Compiled feed-forward network over a flat parameter vector. Activations are
// row-major [batch][channel][length]; dense weights are stored input-major
// (W[i][o]) and conv weights as [filter][channel][tap].

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "entml/error.hpp"
#include "entml/nn/spec.hpp"
#include "entml/random.hpp"

namespace entml::nn {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;
using MapVec = Eigen::Map<Eigen::RowVectorXd>;
using CMapVec = Eigen::Map<const Eigen::RowVectorXd>;

// Every buffer Eigen touches is allocated with its maximal alignment, so the
// vectorized kernels take the same path (and round identically) on every run.
using AlignedVector = std::vector<double, Eigen::aligned_allocator<double>>;

enum class OpType { dense, conv, relu, dropout, maxpool, avgpool };

struct Op {
    OpType type = OpType::dense;
    std::size_t in_ch = 1, in_len = 0, out_ch = 1, out_len = 0;
    std::size_t kernel = 0, stride = 1, padding = 0, pool = 1;
    double rate = 0.0;
    std::size_t w_off = 0, w_count = 0, b_off = 0, b_count = 0;
    bool canonical = false;

    std::size_t in_size() const { return in_ch * in_len; }
    std::size_t out_size() const { return out_ch * out_len; }
    bool has_params() const { return type == OpType::dense || type == OpType::conv; }
};

enum class Mode { eval, train };

struct Workspace {
    std::size_t batch = 0;
    std::vector<AlignedVector> act;  // act[k] is the input of op k; act.back() holds logits
    std::vector<AlignedVector> cols; // im2col buffers for conv ops
    std::vector<AlignedVector> mask; // dropout masks
    AlignedVector g0, g1;            // backward ping-pong buffers
    AlignedVector scratch;
};

class Network {
public:
    Network() = default;

    explicit Network(NetworkSpec spec) : spec_(std::move(spec)) {
        spec_.check();
        compile();
        params_.assign(param_count_, 0.0);
    }

    const NetworkSpec& spec() const { return spec_; }
    const std::vector<Op>& ops() const { return ops_; }
    std::size_t param_count() const { return param_count_; }
    std::size_t input_dim() const { return spec_.input_dim; }
    std::size_t num_classes() const { return spec_.num_classes; }
    AlignedVector& params() { return params_; }
    const AlignedVector& params() const { return params_; }

    void set_params(std::span<const double> p) {
        require(p.size() == param_count_, "Network::set_params: parameter count mismatch");
        params_.assign(p.begin(), p.end());
    }

    // He-normal weights (variance 2 / fan_in), zero biases.
    void init(Rng& rng) {
        std::fill(params_.begin(), params_.end(), 0.0);
        for (const auto& op : ops_) {
            if (!op.has_params()) continue;
            const double fan_in = op.type == OpType::dense ? static_cast<double>(op.in_size())
                                                           : static_cast<double>(op.in_ch * op.kernel);
            const double sd = std::sqrt(2.0 / fan_in);
            for (std::size_t i = 0; i < op.w_count; ++i) params_[op.w_off + i] = sd * standard_normal(rng);
        }
    }

    // For a dataset whose column k is old column perm[k]: reorder the first
    // dense layer's input rows so every forward pass is unchanged.
    void permute_input_weights(std::span<const std::size_t> perm) {
        require(!ops_.empty() && ops_[0].type == OpType::dense,
                "permute_input_weights: the first layer must be dense");
        check_permutation(perm, spec_.input_dim);
        const Op& op = ops_[0];
        std::vector<double> w(params_.begin() + static_cast<std::ptrdiff_t>(op.w_off),
                              params_.begin() + static_cast<std::ptrdiff_t>(op.w_off + op.w_count));
        const std::size_t out = op.out_size();
        for (std::size_t k = 0; k < perm.size(); ++k)
            std::copy_n(w.begin() + static_cast<std::ptrdiff_t>(perm[k] * out), out,
                        params_.begin() + static_cast<std::ptrdiff_t>(op.w_off + k * out));
    }

    static void check_permutation(std::span<const std::size_t> perm, std::size_t n) {
        require(perm.size() == n, "permutation: wrong length");
        std::vector<bool> seen(n, false);
        for (auto p : perm) {
            require(p < n && !seen[p], "permutation: not a bijection");
            seen[p] = true;
        }
    }

    void prepare(Workspace& ws, std::size_t batch) const {
        if (ws.batch == batch && ws.act.size() == ops_.size() + 1) return;
        ws.batch = batch;
        ws.act.resize(ops_.size() + 1);
        ws.cols.resize(ops_.size());
        ws.mask.resize(ops_.size());
        ws.act[0].resize(batch * spec_.input_dim);
        std::size_t widest = spec_.input_dim;
        for (std::size_t k = 0; k < ops_.size(); ++k) {
            const Op& op = ops_[k];
            ws.act[k + 1].resize(batch * op.out_size());
            widest = std::max(widest, op.out_size());
            if (op.type == OpType::conv) ws.cols[k].resize(op.in_ch * op.kernel * batch * op.out_len);
            if (op.type == OpType::dropout) ws.mask[k].resize(batch * op.out_size());
        }
        ws.g0.resize(batch * widest);
        ws.g1.resize(batch * widest);
    }

    // Forward pass over `batch` rows of x; returns the logits (batch x C) held in ws.
    const double* forward(const double* x, std::size_t batch, Workspace& ws, Mode mode = Mode::eval,
                          Rng* rng = nullptr) const {
        prepare(ws, batch);
        std::copy_n(x, batch * spec_.input_dim, ws.act[0].data());
        for (std::size_t k = 0; k < ops_.size(); ++k) forward_op(k, ws, mode, rng);
        return ws.act.back().data();
    }

    std::vector<double> logits(std::span<const double> x) const {
        require(x.size() == spec_.input_dim, "Network::logits: input dimension mismatch");
        Workspace ws;
        const double* out = forward(x.data(), 1, ws);
        return std::vector<double>(out, out + spec_.num_classes);
    }

    std::vector<double> probabilities(std::span<const double> x) const {
        auto z = logits(x);
        softmax_inplace(z.data(), z.size());
        return z;
    }

    static void softmax_inplace(double* z, std::size_t n) {
        const double m = *std::max_element(z, z + n);
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += (z[i] = std::exp(z[i] - m));
        for (std::size_t i = 0; i < n; ++i) z[i] /= s;
    }

    // Backpropagates dlogits (batch x C) through the pass stored in ws.
    // Parameter gradients accumulate into grad when given; the input gradient
    // is written to dinput when given. relu_mult, when given, replaces each
    // ReLU's local derivative by caller-supplied multipliers (batch x width),
    // indexed by op position.
    void backward(Workspace& ws, const double* dlogits, double* grad, double* dinput,
                  const std::vector<const double*>* relu_mult = nullptr) const {
        const std::size_t B = ws.batch;
        double* g = ws.g0.data();
        double* h = ws.g1.data();
        std::copy_n(dlogits, B * spec_.num_classes, g);
        for (std::size_t kk = ops_.size(); kk-- > 0;) {
            const bool need_input = kk > 0 || dinput != nullptr;
            backward_op(kk, ws, g, h, grad, need_input, relu_mult ? (*relu_mult)[kk] : nullptr);
            std::swap(g, h);
        }
        if (dinput) std::copy_n(g, B * spec_.input_dim, dinput);
    }

private:
    void compile() {
        ops_.clear();
        std::size_t ch = 1, len = spec_.input_dim, off = 0;
        bool first_param = true;
        auto add_relu = [&](Activation a) {
            if (a != Activation::relu) return;
            Op r;
            r.type = OpType::relu;
            r.in_ch = r.out_ch = ch;
            r.in_len = r.out_len = len;
            ops_.push_back(r);
        };
        for (const auto& l : spec_.layers) {
            Op op;
            op.in_ch = ch;
            op.in_len = len;
            switch (l.kind) {
            case LayerKind::dense:
                op.type = OpType::dense;
                op.in_ch = 1;
                op.in_len = ch * len;
                op.out_ch = 1;
                op.out_len = l.units;
                op.w_off = off;
                op.w_count = op.in_len * l.units;
                op.b_off = off + op.w_count;
                op.b_count = l.units;
                off += op.w_count + op.b_count;
                op.canonical = spec_.canonical_accumulation && first_param && ops_.empty();
                first_param = false;
                ch = 1;
                len = l.units;
                ops_.push_back(op);
                break;
            case LayerKind::conv1d: {
                require(len + 2 * l.padding >= l.kernel, "conv1d: kernel wider than padded input");
                op.type = OpType::conv;
                op.kernel = l.kernel;
                op.stride = l.stride;
                op.padding = l.padding;
                op.out_ch = l.units;
                op.out_len = (len + 2 * l.padding - l.kernel) / l.stride + 1;
                op.w_off = off;
                op.w_count = l.units * ch * l.kernel;
                op.b_off = off + op.w_count;
                op.b_count = l.units;
                off += op.w_count + op.b_count;
                first_param = false;
                ch = op.out_ch;
                len = op.out_len;
                ops_.push_back(op);
                break;
            }
            case LayerKind::flatten: break; // layout is already channel-major
            case LayerKind::dropout:
                op.type = OpType::dropout;
                op.rate = l.rate;
                op.out_ch = ch;
                op.out_len = len;
                ops_.push_back(op);
                break;
            case LayerKind::maxpool:
            case LayerKind::avgpool:
                require(len >= l.pool, "pooling: window wider than input");
                op.type = l.kind == LayerKind::maxpool ? OpType::maxpool : OpType::avgpool;
                op.pool = l.pool;
                op.out_ch = ch;
                op.out_len = len / l.pool;
                ch = op.out_ch;
                len = op.out_len;
                ops_.push_back(op);
                break;
            }
            add_relu(l.activation);
        }
        param_count_ = off;
    }

    void forward_op(std::size_t k, Workspace& ws, Mode mode, Rng* rng) const {
        const Op& op = ops_[k];
        const std::size_t B = ws.batch;
        const double* in = ws.act[k].data();
        double* out = ws.act[k + 1].data();
        const double* p = params_.data();
        switch (op.type) {
        case OpType::dense: {
            const std::size_t ni = op.in_size(), no = op.out_size();
            if (op.canonical) {
                AlignedVector& prod = ws.scratch;
                prod.resize(ni);
                for (std::size_t b = 0; b < B; ++b)
                    for (std::size_t o = 0; o < no; ++o) {
                        for (std::size_t i = 0; i < ni; ++i) prod[i] = in[b * ni + i] * p[op.w_off + i * no + o];
                        std::sort(prod.begin(), prod.end());
                        double s = 0.0;
                        for (double v : prod) s += v;
                        out[b * no + o] = s + p[op.b_off + o];
                    }
                break;
            }
            CMapMat X(in, B, ni);
            CMapMat W(p + op.w_off, ni, no);
            CMapVec bias(p + op.b_off, no);
            MapMat Y(out, B, no);
            Y.noalias() = X * W;
            Y.rowwise() += bias;
            break;
        }
        case OpType::conv: {
            const std::size_t ck = op.in_ch * op.kernel, cols_n = B * op.out_len;
            double* cols = ws.cols[k].data();
            im2col(op, in, B, cols);
            CMapMat W(p + op.w_off, op.out_ch, ck);
            CMapMat C(cols, ck, cols_n);
            AlignedVector& tmp = ws.scratch;
            tmp.resize(op.out_ch * cols_n);
            MapMat Y(tmp.data(), op.out_ch, cols_n);
            Y.noalias() = W * C;
            for (std::size_t f = 0; f < op.out_ch; ++f) {
                const double bf = p[op.b_off + f];
                for (std::size_t b = 0; b < B; ++b)
                    for (std::size_t t = 0; t < op.out_len; ++t)
                        out[(b * op.out_ch + f) * op.out_len + t] = tmp[f * cols_n + b * op.out_len + t] + bf;
            }
            break;
        }
        case OpType::relu: {
            const std::size_t n = B * op.out_size();
            for (std::size_t i = 0; i < n; ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
            break;
        }
        case OpType::dropout: {
            const std::size_t n = B * op.out_size();
            if (mode == Mode::train && op.rate > 0.0) {
                require(rng != nullptr, "dropout: training mode needs a random stream");
                const double keep = 1.0 - op.rate;
                double* m = ws.mask[k].data();
                for (std::size_t i = 0; i < n; ++i) {
                    m[i] = uniform01(*rng) < keep ? 1.0 / keep : 0.0;
                    out[i] = in[i] * m[i];
                }
            } else {
                if (!ws.mask[k].empty()) std::fill(ws.mask[k].begin(), ws.mask[k].end(), 1.0);
                std::copy_n(in, n, out);
            }
            break;
        }
        case OpType::maxpool:
        case OpType::avgpool:
            for (std::size_t b = 0; b < B; ++b)
                for (std::size_t c = 0; c < op.out_ch; ++c)
                    for (std::size_t t = 0; t < op.out_len; ++t) {
                        const double* w = in + (b * op.in_ch + c) * op.in_len + t * op.pool;
                        double v = w[0];
                        for (std::size_t q = 1; q < op.pool; ++q) v = op.type == OpType::maxpool ? std::max(v, w[q]) : v + w[q];
                        if (op.type == OpType::avgpool) v /= static_cast<double>(op.pool);
                        out[(b * op.out_ch + c) * op.out_len + t] = v;
                    }
            break;
        }
    }

    // g: gradient w.r.t. the op's output; writes the gradient w.r.t. its input into h.
    void backward_op(std::size_t k, Workspace& ws, const double* g, double* h, double* grad, bool need_input,
                     const double* relu_mult) const {
        const Op& op = ops_[k];
        const std::size_t B = ws.batch;
        const double* in = ws.act[k].data();
        const double* p = params_.data();
        switch (op.type) {
        case OpType::dense: {
            const std::size_t ni = op.in_size(), no = op.out_size();
            if (op.canonical) {
                // Element-wise loops keep every entry's arithmetic independent of its position.
                if (grad) {
                    for (std::size_t b = 0; b < B; ++b) {
                        for (std::size_t i = 0; i < ni; ++i) {
                            const double xi = in[b * ni + i];
                            double* dw = grad + op.w_off + i * no;
                            for (std::size_t o = 0; o < no; ++o) dw[o] += xi * g[b * no + o];
                        }
                        for (std::size_t o = 0; o < no; ++o) grad[op.b_off + o] += g[b * no + o];
                    }
                }
                if (need_input)
                    for (std::size_t b = 0; b < B; ++b)
                        for (std::size_t i = 0; i < ni; ++i) {
                            double s = 0.0;
                            for (std::size_t o = 0; o < no; ++o) s += g[b * no + o] * p[op.w_off + i * no + o];
                            h[b * ni + i] = s;
                        }
                return;
            }
            CMapMat G(g, B, no);
            CMapMat W(p + op.w_off, ni, no);
            if (grad) {
                CMapMat X(in, B, ni);
                MapMat dW(grad + op.w_off, ni, no);
                MapVec db(grad + op.b_off, no);
                dW.noalias() += X.transpose() * G;
                db += G.colwise().sum();
            }
            if (need_input) {
                MapMat H(h, B, ni);
                H.noalias() = G * W.transpose();
            }
            return;
        }
        case OpType::conv: {
            const std::size_t ck = op.in_ch * op.kernel, cols_n = B * op.out_len;
            AlignedVector& tmp = ws.scratch;
            tmp.resize(op.out_ch * cols_n);
            for (std::size_t b = 0; b < B; ++b)
                for (std::size_t f = 0; f < op.out_ch; ++f)
                    for (std::size_t t = 0; t < op.out_len; ++t)
                        tmp[f * cols_n + b * op.out_len + t] = g[(b * op.out_ch + f) * op.out_len + t];
            CMapMat G(tmp.data(), op.out_ch, cols_n);
            if (grad) {
                CMapMat C(ws.cols[k].data(), ck, cols_n);
                MapMat dW(grad + op.w_off, op.out_ch, ck);
                dW.noalias() += G * C.transpose();
                for (std::size_t f = 0; f < op.out_ch; ++f) grad[op.b_off + f] += G.row(f).sum();
            }
            if (need_input) {
                CMapMat W(p + op.w_off, op.out_ch, ck);
                RowMat dC = W.transpose() * G;
                col2im(op, dC.data(), B, h);
            }
            return;
        }
        case OpType::relu: {
            if (!need_input) return;
            const std::size_t n = B * op.out_size();
            if (relu_mult) {
                for (std::size_t i = 0; i < n; ++i) h[i] = g[i] * relu_mult[i];
            } else {
                for (std::size_t i = 0; i < n; ++i) h[i] = in[i] > 0.0 ? g[i] : 0.0;
            }
            return;
        }
        case OpType::dropout: {
            if (!need_input) return;
            const std::size_t n = B * op.out_size();
            const double* m = ws.mask[k].data();
            for (std::size_t i = 0; i < n; ++i) h[i] = g[i] * m[i];
            return;
        }
        case OpType::maxpool:
        case OpType::avgpool: {
            if (!need_input) return;
            std::fill_n(h, B * op.in_size(), 0.0);
            for (std::size_t b = 0; b < B; ++b)
                for (std::size_t c = 0; c < op.out_ch; ++c)
                    for (std::size_t t = 0; t < op.out_len; ++t) {
                        const std::size_t base = (b * op.in_ch + c) * op.in_len + t * op.pool;
                        const double gv = g[(b * op.out_ch + c) * op.out_len + t];
                        if (op.type == OpType::avgpool) {
                            for (std::size_t q = 0; q < op.pool; ++q) h[base + q] += gv / static_cast<double>(op.pool);
                        } else {
                            std::size_t arg = 0;
                            for (std::size_t q = 1; q < op.pool; ++q)
                                if (in[base + q] > in[base + arg]) arg = q;
                            h[base + arg] += gv;
                        }
                    }
            return;
        }
        }
    }

    // cols[(c*K + j)][b*Lout + t] = in[b][c][t*S + j - P], zero outside.
    static void im2col(const Op& op, const double* in, std::size_t B, double* cols) {
        const std::size_t cols_n = B * op.out_len;
        for (std::size_t c = 0; c < op.in_ch; ++c)
            for (std::size_t j = 0; j < op.kernel; ++j) {
                double* row = cols + (c * op.kernel + j) * cols_n;
                for (std::size_t b = 0; b < B; ++b) {
                    const double* src = in + (b * op.in_ch + c) * op.in_len;
                    for (std::size_t t = 0; t < op.out_len; ++t) {
                        const long pos = static_cast<long>(t * op.stride + j) - static_cast<long>(op.padding);
                        row[b * op.out_len + t] = (pos >= 0 && pos < static_cast<long>(op.in_len)) ? src[pos] : 0.0;
                    }
                }
            }
    }

    static void col2im(const Op& op, const double* dcols, std::size_t B, double* din) {
        const std::size_t cols_n = B * op.out_len;
        std::fill_n(din, B * op.in_size(), 0.0);
        for (std::size_t c = 0; c < op.in_ch; ++c)
            for (std::size_t j = 0; j < op.kernel; ++j) {
                const double* row = dcols + (c * op.kernel + j) * cols_n;
                for (std::size_t b = 0; b < B; ++b) {
                    double* dst = din + (b * op.in_ch + c) * op.in_len;
                    for (std::size_t t = 0; t < op.out_len; ++t) {
                        const long pos = static_cast<long>(t * op.stride + j) - static_cast<long>(op.padding);
                        if (pos >= 0 && pos < static_cast<long>(op.in_len)) dst[pos] += row[b * op.out_len + t];
                    }
                }
            }
    }

    NetworkSpec spec_;
    std::vector<Op> ops_;
    std::size_t param_count_ = 0;
    AlignedVector params_;
};

} // namespace entml::nn
