#include "vrl/tape.hpp"

#include <algorithm>
#include <cmath>

namespace vrl {

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        throw DimensionError(std::string(op) + ": shapes " + a.shape_str() + " vs " + b.shape_str());
}

}  // namespace

Var Tape::push(Tensor value, std::function<void(Tape&, const Tensor&)> back) {
    nodes_.push_back(Node{std::move(value), std::move(back)});
    return static_cast<Var>(nodes_.size() - 1);
}

Var Tape::leaf(Tensor value) { return push(std::move(value), nullptr); }

double Tape::scalar(Var v) const {
    const Tensor& t = val(v);
    if (t.count() != 1) throw ContractError("scalar() on non-scalar node " + t.shape_str());
    return t.data[0];
}

Var Tape::matmul(Var a, Var b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    const int m = A.rows(), n = A.cols();
    const int bn = B.rows(), p = B.cols();
    if (A.rank() != 2 || n != bn)
        throw DimensionError("matmul: " + A.shape_str() + " by " + B.shape_str());
    Tensor out = (B.rank() == 1) ? Tensor::zeros({m}) : Tensor::zeros({m, p});
    for (int i = 0; i < m; ++i)
        for (int kk = 0; kk < n; ++kk) {
            const double av = A.at(i, kk);
            if (av == 0.0) continue;
            for (int j = 0; j < p; ++j) out.at(i, j) += av * B.at(kk, j);
        }
    return push(std::move(out), [a, b, m, n, p](Tape& t, const Tensor& g) {
        const Tensor& A = t.val(a);
        const Tensor& B = t.val(b);
        Tensor& ga = t.grad_ref(a);
        Tensor& gb = t.grad_ref(b);
        // dA = g . B^T, dB = A^T . g
        for (int i = 0; i < m; ++i)
            for (int kk = 0; kk < n; ++kk) {
                double acc = 0.0;
                for (int j = 0; j < p; ++j) acc += g.at(i, j) * B.at(kk, j);
                ga.at(i, kk) += acc;
            }
        for (int kk = 0; kk < n; ++kk)
            for (int j = 0; j < p; ++j) {
                double acc = 0.0;
                for (int i = 0; i < m; ++i) acc += A.at(i, kk) * g.at(i, j);
                gb.at(kk, j) += acc;
            }
    });
}

Var Tape::add(Var a, Var b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    check_same_shape(A, B, "add");
    Tensor out = A;
    for (int i = 0; i < out.count(); ++i) out.at(i) += B.at(i);
    return push(std::move(out), [a, b](Tape& t, const Tensor& g) {
        Tensor& ga = t.grad_ref(a);
        Tensor& gb = t.grad_ref(b);
        for (int i = 0; i < g.count(); ++i) {
            ga.at(i) += g.at(i);
            gb.at(i) += g.at(i);
        }
    });
}

Var Tape::sub(Var a, Var b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    check_same_shape(A, B, "sub");
    Tensor out = A;
    for (int i = 0; i < out.count(); ++i) out.at(i) -= B.at(i);
    return push(std::move(out), [a, b](Tape& t, const Tensor& g) {
        Tensor& ga = t.grad_ref(a);
        Tensor& gb = t.grad_ref(b);
        for (int i = 0; i < g.count(); ++i) {
            ga.at(i) += g.at(i);
            gb.at(i) -= g.at(i);
        }
    });
}

Var Tape::mul(Var a, Var b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    check_same_shape(A, B, "mul");
    Tensor out = A;
    for (int i = 0; i < out.count(); ++i) out.at(i) *= B.at(i);
    return push(std::move(out), [a, b](Tape& t, const Tensor& g) {
        const Tensor& A = t.val(a);
        const Tensor& B = t.val(b);
        Tensor& ga = t.grad_ref(a);
        Tensor& gb = t.grad_ref(b);
        for (int i = 0; i < g.count(); ++i) {
            ga.at(i) += g.at(i) * B.at(i);
            gb.at(i) += g.at(i) * A.at(i);
        }
    });
}

Var Tape::add_bias(Var m, Var b) {
    const Tensor& M = val(m);
    const Tensor& B = val(b);
    if (B.rank() != 1 || B.rows() != M.rows())
        throw DimensionError("add_bias: " + M.shape_str() + " + " + B.shape_str());
    Tensor out = M;
    for (int i = 0; i < out.rows(); ++i)
        for (int j = 0; j < out.cols(); ++j) out.at(i, j) += B.at(i);
    return push(std::move(out), [m, b](Tape& t, const Tensor& g) {
        Tensor& gm = t.grad_ref(m);
        Tensor& gb = t.grad_ref(b);
        for (int i = 0; i < g.rows(); ++i)
            for (int j = 0; j < g.cols(); ++j) {
                gm.at(i, j) += g.at(i, j);
                gb.at(i) += g.at(i, j);
            }
    });
}

Var Tape::tanh_(Var x) {
    Tensor out = val(x);
    for (double& v : out.data) v = std::tanh(v);
    return push(std::move(out), [x, self = static_cast<Var>(nodes_.size())](Tape& t, const Tensor& g) {
        const Tensor& y = t.val(self);
        Tensor& gx = t.grad_ref(x);
        for (int i = 0; i < g.count(); ++i) gx.at(i) += g.at(i) * (1.0 - y.at(i) * y.at(i));
    });
}

Var Tape::sigmoid_(Var x) {
    Tensor out = val(x);
    for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
    return push(std::move(out), [x, self = static_cast<Var>(nodes_.size())](Tape& t, const Tensor& g) {
        const Tensor& y = t.val(self);
        Tensor& gx = t.grad_ref(x);
        for (int i = 0; i < g.count(); ++i) gx.at(i) += g.at(i) * y.at(i) * (1.0 - y.at(i));
    });
}

Var Tape::log_(Var x) {
    Tensor out = val(x);
    for (double& v : out.data) {
        if (v <= 0.0) throw DomainError("log of non-positive value " + std::to_string(v));
        v = std::log(v);
    }
    return push(std::move(out), [x](Tape& t, const Tensor& g) {
        const Tensor& in = t.val(x);
        Tensor& gx = t.grad_ref(x);
        for (int i = 0; i < g.count(); ++i) gx.at(i) += g.at(i) / in.at(i);
    });
}

Var Tape::relu(Var x) {
    Tensor out = val(x);
    for (double& v : out.data) v = std::max(v, 0.0);
    return push(std::move(out), [x](Tape& t, const Tensor& g) {
        const Tensor& in = t.val(x);
        Tensor& gx = t.grad_ref(x);
        for (int i = 0; i < g.count(); ++i)
            if (in.at(i) > 0.0) gx.at(i) += g.at(i);
    });
}

Var Tape::scale(Var x, double c) {
    Tensor out = val(x);
    for (double& v : out.data) v *= c;
    return push(std::move(out), [x, c](Tape& t, const Tensor& g) {
        Tensor& gx = t.grad_ref(x);
        for (int i = 0; i < g.count(); ++i) gx.at(i) += c * g.at(i);
    });
}

Var Tape::scalar_mul(Var s, Var x) {
    const Tensor& S = val(s);
    if (S.count() != 1) throw DimensionError("scalar_mul: first argument must be a scalar");
    Tensor out = val(x);
    for (double& v : out.data) v *= S.at(0);
    return push(std::move(out), [s, x](Tape& t, const Tensor& g) {
        const Tensor& S = t.val(s);
        const Tensor& X = t.val(x);
        Tensor& gs = t.grad_ref(s);
        Tensor& gx = t.grad_ref(x);
        for (int i = 0; i < g.count(); ++i) {
            gs.at(0) += g.at(i) * X.at(i);
            gx.at(i) += g.at(i) * S.at(0);
        }
    });
}

Var Tape::softmax(Var x) {
    const Tensor& in = val(x);
    if (in.rank() != 1 || in.rows() < 1) throw ContractError("softmax needs a non-empty vector");
    Tensor out = in;
    const double mx = *std::max_element(out.data.begin(), out.data.end());
    double z = 0.0;
    for (double& v : out.data) {
        v = std::exp(v - mx);
        z += v;
    }
    for (double& v : out.data) v /= z;
    return push(std::move(out), [x, self = static_cast<Var>(nodes_.size())](Tape& t, const Tensor& g) {
        const Tensor& y = t.val(self);
        Tensor& gx = t.grad_ref(x);
        double dot = 0.0;
        for (int i = 0; i < g.count(); ++i) dot += g.at(i) * y.at(i);
        for (int i = 0; i < g.count(); ++i) gx.at(i) += y.at(i) * (g.at(i) - dot);
    });
}

Var Tape::sum(Var x) {
    const Tensor& in = val(x);
    double acc = 0.0;
    for (double v : in.data) acc += v;
    return push(Tensor::from({1}, {acc}), [x](Tape& t, const Tensor& g) {
        Tensor& gx = t.grad_ref(x);
        for (int i = 0; i < gx.count(); ++i) gx.at(i) += g.at(0);
    });
}

Var Tape::concat(std::span<const Var> parts) {
    int n = 0;
    for (Var p : parts) {
        if (val(p).rank() != 1) throw DimensionError("concat expects vectors");
        n += val(p).rows();
    }
    Tensor out = Tensor::zeros({n});
    int off = 0;
    for (Var p : parts)
        for (int i = 0; i < val(p).rows(); ++i) out.at(off++) = val(p).at(i);
    std::vector<Var> owned(parts.begin(), parts.end());
    return push(std::move(out), [owned](Tape& t, const Tensor& g) {
        int off = 0;
        for (Var p : owned) {
            Tensor& gp = t.grad_ref(p);
            for (int i = 0; i < gp.count(); ++i) gp.at(i) += g.at(off + i);
            off += gp.count();
        }
    });
}

Var Tape::slice(Var v, int r0, int r1) {
    const Tensor& in = val(v);
    if (r0 < 0 || r1 > in.rows() || r0 >= r1)
        throw DimensionError("slice [" + std::to_string(r0) + "," + std::to_string(r1) + ") of " +
                             in.shape_str());
    const int c = in.cols();
    Tensor out = (in.rank() == 1) ? Tensor::zeros({r1 - r0}) : Tensor::zeros({r1 - r0, c});
    for (int i = r0; i < r1; ++i)
        for (int j = 0; j < c; ++j) out.at(i - r0, j) = in.at(i, j);
    return push(std::move(out), [v, r0, r1, c](Tape& t, const Tensor& g) {
        Tensor& gv = t.grad_ref(v);
        for (int i = r0; i < r1; ++i)
            for (int j = 0; j < c; ++j) gv.at(i, j) += g.at(i - r0, j);
    });
}

Var Tape::l2_normalize(Var v) {
    const Tensor& in = val(v);
    if (in.rank() != 1) throw DimensionError("l2_normalize expects a vector");
    double nrm = 0.0;
    for (double x : in.data) nrm += x * x;
    nrm = std::sqrt(nrm);
    if (nrm == 0.0) throw DomainError("l2_normalize of zero vector");
    Tensor out = in;
    for (double& x : out.data) x /= nrm;
    return push(std::move(out),
                [v, nrm, self = static_cast<Var>(nodes_.size())](Tape& t, const Tensor& g) {
                    const Tensor& y = t.val(self);
                    Tensor& gv = t.grad_ref(v);
                    double dot = 0.0;
                    for (int i = 0; i < g.count(); ++i) dot += g.at(i) * y.at(i);
                    for (int i = 0; i < g.count(); ++i) gv.at(i) += (g.at(i) - y.at(i) * dot) / nrm;
                });
}

void Tape::backward(Var loss) {
    if (val(loss).count() != 1) throw ContractError("backward requires a scalar loss");
    grads_.clear();
    grads_.reserve(nodes_.size());
    for (const Node& n : nodes_) grads_.push_back(Tensor::zeros(n.value.shape));
    grads_[static_cast<std::size_t>(loss)].at(0) = 1.0;
    for (Var v = loss; v >= 0; --v) {
        const Node& n = nodes_[static_cast<std::size_t>(v)];
        if (n.back) n.back(*this, grads_[static_cast<std::size_t>(v)]);
    }
}

}  // namespace vrl
