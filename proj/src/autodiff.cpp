#include "ingram/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ingram/errors.hpp"

namespace ingram {

namespace {

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
    throw NumericError(std::string(op) + ": shape mismatch (" + std::to_string(a.rows) + "x" +
                       std::to_string(a.cols) + " vs " + std::to_string(b.rows) + "x" +
                       std::to_string(b.cols) + ")");
}

}  // namespace

const char* Tape::op_name(Op op) {
    switch (op) {
        case Op::leaf: return "leaf";
        case Op::matmul: return "matmul";
        case Op::add: return "add";
        case Op::sub: return "sub";
        case Op::mul: return "mul";
        case Op::scale: return "scale";
        case Op::add_scalar: return "add_scalar";
        case Op::leaky_relu: return "leaky_relu";
        case Op::relu: return "relu";
        case Op::concat_rows: return "concat_rows";
        case Op::concat_cols: return "concat_cols";
        case Op::slice_rows: return "slice_rows";
        case Op::slice_cols: return "slice_cols";
        case Op::gather_rows: return "gather_rows";
        case Op::gather_rows_sum: return "gather_rows_sum";
        case Op::scale_rows: return "scale_rows";
        case Op::segment_softmax: return "segment_softmax";
        case Op::segment_sum: return "segment_sum";
        case Op::segment_weighted_sum: return "segment_weighted_sum";
        case Op::row_sum: return "row_sum";
        case Op::sum_all: return "sum_all";
    }
    return "?";
}

void Tape::check_finite(const Node& n) const {
    if (!n.value.all_finite())
        throw NumericError(std::string("non-finite value produced by ") + op_name(n.op));
}

Tape::Id Tape::push(Node n) {
    check_finite(n);
    nodes_.push_back(std::move(n));
    return Id(nodes_.size() - 1);
}

Tape::Id Tape::input(Tensor t, bool requires_grad) {
    Node n;
    n.op = Op::leaf;
    n.value = std::move(t);
    n.requires_grad = requires_grad;
    return push(std::move(n));
}

Tape::Id Tape::matmul(Id a, Id b, bool trans_a, bool trans_b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    const int ar = trans_a ? A.cols : A.rows, ac = trans_a ? A.rows : A.cols;
    const int br = trans_b ? B.cols : B.rows, bc = trans_b ? B.rows : B.cols;
    if (ac != br) shape_error("matmul", A, B);
    Node n;
    n.op = Op::matmul;
    n.a = a;
    n.b = b;
    n.i0 = trans_a;
    n.i1 = trans_b;
    n.requires_grad = requires_grad(a) || requires_grad(b);
    n.value = Tensor(ar, bc);
    // Loop order keeps the innermost stride unit-length for the common
    // (false, true) and (false, false) cases.
    if (!trans_a && !trans_b) {
        for (int i = 0; i < ar; ++i)
            for (int k = 0; k < ac; ++k) {
                const double aik = A.at(i, k);
                if (aik == 0.0) continue;
                const double* brow = &B.v[size_t(k) * B.cols];
                double* orow = &n.value.v[size_t(i) * bc];
                for (int j = 0; j < bc; ++j) orow[j] += aik * brow[j];
            }
    } else if (!trans_a && trans_b) {
        // Four output columns per pass: each dot product still accumulates
        // in ascending k order (bit-identical to the plain loop), but the
        // four independent chains expose instruction-level parallelism.
        for (int i = 0; i < ar; ++i) {
            const double* arow = &A.v[size_t(i) * A.cols];
            int j = 0;
            for (; j + 4 <= bc; j += 4) {
                const double* b0 = &B.v[size_t(j) * B.cols];
                const double* b1 = &B.v[size_t(j + 1) * B.cols];
                const double* b2 = &B.v[size_t(j + 2) * B.cols];
                const double* b3 = &B.v[size_t(j + 3) * B.cols];
                double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
                for (int k = 0; k < ac; ++k) {
                    const double a = arow[k];
                    s0 += a * b0[k];
                    s1 += a * b1[k];
                    s2 += a * b2[k];
                    s3 += a * b3[k];
                }
                double* orow = &n.value.v[size_t(i) * bc];
                orow[j] = s0;
                orow[j + 1] = s1;
                orow[j + 2] = s2;
                orow[j + 3] = s3;
            }
            for (; j < bc; ++j) {
                const double* brow = &B.v[size_t(j) * B.cols];
                double s = 0.0;
                for (int k = 0; k < ac; ++k) s += arow[k] * brow[k];
                n.value.at(i, j) = s;
            }
        }
    } else if (trans_a && !trans_b) {
        for (int k = 0; k < ac; ++k)
            for (int i = 0; i < ar; ++i) {
                const double aki = A.at(k, i);
                if (aki == 0.0) continue;
                const double* brow = &B.v[size_t(k) * B.cols];
                double* orow = &n.value.v[size_t(i) * bc];
                for (int j = 0; j < bc; ++j) orow[j] += aki * brow[j];
            }
    } else {
        for (int i = 0; i < ar; ++i)
            for (int j = 0; j < bc; ++j) {
                double s = 0.0;
                for (int k = 0; k < ac; ++k) s += A.at(k, i) * B.at(j, k);
                n.value.at(i, j) = s;
            }
    }
    return push(std::move(n));
}

Tape::Id Tape::add(Id a, Id b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (!A.same_shape(B)) shape_error("add", A, B);
    Node n;
    n.op = Op::add;
    n.a = a;
    n.b = b;
    n.requires_grad = requires_grad(a) || requires_grad(b);
    n.value = A;
    for (size_t i = 0; i < B.size(); ++i) n.value.v[i] += B.v[i];
    return push(std::move(n));
}

Tape::Id Tape::sub(Id a, Id b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (!A.same_shape(B)) shape_error("sub", A, B);
    Node n;
    n.op = Op::sub;
    n.a = a;
    n.b = b;
    n.requires_grad = requires_grad(a) || requires_grad(b);
    n.value = A;
    for (size_t i = 0; i < B.size(); ++i) n.value.v[i] -= B.v[i];
    return push(std::move(n));
}

Tape::Id Tape::mul(Id a, Id b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (!A.same_shape(B)) shape_error("mul", A, B);
    Node n;
    n.op = Op::mul;
    n.a = a;
    n.b = b;
    n.requires_grad = requires_grad(a) || requires_grad(b);
    n.value = A;
    for (size_t i = 0; i < B.size(); ++i) n.value.v[i] *= B.v[i];
    return push(std::move(n));
}

Tape::Id Tape::scale(Id a, double c) {
    Node n;
    n.op = Op::scale;
    n.a = a;
    n.scalar = c;
    n.requires_grad = requires_grad(a);
    n.value = value(a);
    for (auto& x : n.value.v) x *= c;
    return push(std::move(n));
}

Tape::Id Tape::add_scalar(Id a, double c) {
    Node n;
    n.op = Op::add_scalar;
    n.a = a;
    n.scalar = c;
    n.requires_grad = requires_grad(a);
    n.value = value(a);
    for (auto& x : n.value.v) x += c;
    return push(std::move(n));
}

Tape::Id Tape::leaky_relu(Id a, double negative_slope) {
    Node n;
    n.op = Op::leaky_relu;
    n.a = a;
    n.scalar = negative_slope;
    n.requires_grad = requires_grad(a);
    n.value = value(a);
    for (auto& x : n.value.v)
        if (x < 0.0) x *= negative_slope;
    return push(std::move(n));
}

Tape::Id Tape::relu(Id a) {
    Node n;
    n.op = Op::relu;
    n.a = a;
    n.requires_grad = requires_grad(a);
    n.value = value(a);
    for (auto& x : n.value.v) x = std::max(0.0, x);
    return push(std::move(n));
}

Tape::Id Tape::concat_rows(Id a, Id b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (A.cols != B.cols) shape_error("concat_rows", A, B);
    Node n;
    n.op = Op::concat_rows;
    n.a = a;
    n.b = b;
    n.requires_grad = requires_grad(a) || requires_grad(b);
    n.value = Tensor(A.rows + B.rows, A.cols);
    std::copy(A.v.begin(), A.v.end(), n.value.v.begin());
    std::copy(B.v.begin(), B.v.end(), n.value.v.begin() + ptrdiff_t(A.size()));
    return push(std::move(n));
}

Tape::Id Tape::concat_cols(Id a, Id b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (A.rows != B.rows) shape_error("concat_cols", A, B);
    Node n;
    n.op = Op::concat_cols;
    n.a = a;
    n.b = b;
    n.requires_grad = requires_grad(a) || requires_grad(b);
    n.value = Tensor(A.rows, A.cols + B.cols);
    for (int r = 0; r < A.rows; ++r) {
        std::copy_n(&A.v[size_t(r) * A.cols], A.cols, &n.value.v[size_t(r) * n.value.cols]);
        std::copy_n(&B.v[size_t(r) * B.cols], B.cols,
                    &n.value.v[size_t(r) * n.value.cols + size_t(A.cols)]);
    }
    return push(std::move(n));
}

Tape::Id Tape::slice_rows(Id a, int r0, int r1) {
    const Tensor& A = value(a);
    if (r0 < 0 || r1 > A.rows || r0 >= r1) throw NumericError("slice_rows: bad range");
    Node n;
    n.op = Op::slice_rows;
    n.a = a;
    n.i0 = r0;
    n.i1 = r1;
    n.requires_grad = requires_grad(a);
    n.value = Tensor(r1 - r0, A.cols);
    std::copy_n(&A.v[size_t(r0) * A.cols], n.value.size(), n.value.v.begin());
    return push(std::move(n));
}

Tape::Id Tape::slice_cols(Id a, int c0, int c1) {
    const Tensor& A = value(a);
    if (c0 < 0 || c1 > A.cols || c0 >= c1) throw NumericError("slice_cols: bad range");
    Node n;
    n.op = Op::slice_cols;
    n.a = a;
    n.i0 = c0;
    n.i1 = c1;
    n.requires_grad = requires_grad(a);
    n.value = Tensor(A.rows, c1 - c0);
    for (int r = 0; r < A.rows; ++r)
        std::copy_n(&A.v[size_t(r) * A.cols + size_t(c0)], c1 - c0,
                    &n.value.v[size_t(r) * n.value.cols]);
    return push(std::move(n));
}

Tape::Id Tape::gather_rows(Id a, std::vector<int32_t> ids) {
    const Tensor& A = value(a);
    for (int32_t id : ids)
        if (id < 0 || id >= A.rows) throw NumericError("gather_rows: index out of range");
    Node n;
    n.op = Op::gather_rows;
    n.a = a;
    n.requires_grad = requires_grad(a);
    n.value = Tensor(int(ids.size()), A.cols);
    for (size_t r = 0; r < ids.size(); ++r)
        std::copy_n(&A.v[size_t(ids[r]) * A.cols], A.cols, &n.value.v[r * size_t(A.cols)]);
    n.idx = std::move(ids);
    return push(std::move(n));
}

Tape::Id Tape::gather_rows_sum(
    const std::vector<std::pair<Id, const std::vector<int32_t>*>>& terms) {
    if (terms.empty()) throw NumericError("gather_rows_sum: no terms");
    const size_t rows = terms[0].second->size();
    const int cols = value(terms[0].first).cols;
    Node n;
    n.op = Op::gather_rows_sum;
    n.value = Tensor(int(rows), cols);
    for (const auto& [src, ids] : terms) {
        const Tensor& A = value(src);
        if (A.cols != cols || ids->size() != rows)
            throw NumericError("gather_rows_sum: mismatched term");
        n.requires_grad = n.requires_grad || requires_grad(src);
        n.extra_parents.push_back(src);
        n.idxs.push_back(*ids);
        for (size_t r = 0; r < rows; ++r) {
            const int32_t id = (*ids)[r];
            if (id < 0 || id >= A.rows) throw NumericError("gather_rows_sum: index out of range");
            const double* srow = &A.v[size_t(id) * cols];
            double* orow = &n.value.v[r * size_t(cols)];
            for (int c = 0; c < cols; ++c) orow[c] += srow[c];
        }
    }
    return push(std::move(n));
}

Tape::Id Tape::scale_rows(Id a, Id w) {
    const Tensor& A = value(a);
    const Tensor& W = value(w);
    if (W.cols != 1 || W.rows != A.rows) shape_error("scale_rows", A, W);
    Node n;
    n.op = Op::scale_rows;
    n.a = a;
    n.b = w;
    n.requires_grad = requires_grad(a) || requires_grad(w);
    n.value = A;
    for (int r = 0; r < A.rows; ++r) {
        const double s = W.v[size_t(r)];
        double* row = &n.value.v[size_t(r) * A.cols];
        for (int c = 0; c < A.cols; ++c) row[c] *= s;
    }
    return push(std::move(n));
}

Tape::Id Tape::segment_softmax(Id logits, std::vector<int32_t> seg, int num_segments) {
    const Tensor& L = value(logits);
    if (L.cols != 1 || L.rows != int(seg.size()))
        throw NumericError("segment_softmax: logits must be [n x 1] matching segment ids");
    for (int32_t s : seg)
        if (s < 0 || s >= num_segments) throw NumericError("segment_softmax: bad segment id");
    Node n;
    n.op = Op::segment_softmax;
    n.a = logits;
    n.i0 = num_segments;
    n.requires_grad = requires_grad(logits);
    n.value = Tensor(L.rows, 1);
    std::vector<double> seg_max(size_t(num_segments), -std::numeric_limits<double>::infinity());
    for (int r = 0; r < L.rows; ++r)
        seg_max[size_t(seg[size_t(r)])] = std::max(seg_max[size_t(seg[size_t(r)])], L.v[size_t(r)]);
    std::vector<double> seg_sum(size_t(num_segments), 0.0);
    for (int r = 0; r < L.rows; ++r) {
        const double e = std::exp(L.v[size_t(r)] - seg_max[size_t(seg[size_t(r)])]);
        n.value.v[size_t(r)] = e;
        seg_sum[size_t(seg[size_t(r)])] += e;
    }
    for (int r = 0; r < L.rows; ++r) n.value.v[size_t(r)] /= seg_sum[size_t(seg[size_t(r)])];
    n.idx = std::move(seg);
    return push(std::move(n));
}

Tape::Id Tape::segment_sum(Id a, std::vector<int32_t> seg, int num_segments) {
    const Tensor& A = value(a);
    if (A.rows != int(seg.size())) throw NumericError("segment_sum: segment ids mismatch rows");
    for (int32_t s : seg)
        if (s < 0 || s >= num_segments) throw NumericError("segment_sum: bad segment id");
    Node n;
    n.op = Op::segment_sum;
    n.a = a;
    n.i0 = num_segments;
    n.requires_grad = requires_grad(a);
    n.value = Tensor(num_segments, A.cols);
    for (int r = 0; r < A.rows; ++r) {
        double* orow = &n.value.v[size_t(seg[size_t(r)]) * A.cols];
        const double* srow = &A.v[size_t(r) * A.cols];
        for (int c = 0; c < A.cols; ++c) orow[c] += srow[c];
    }
    n.idx = std::move(seg);
    return push(std::move(n));
}

Tape::Id Tape::segment_weighted_sum(Id a, Id w, std::vector<int32_t> seg, int num_segments) {
    const Tensor& A = value(a);
    const Tensor& W = value(w);
    if (W.cols != 1 || W.rows != A.rows) shape_error("segment_weighted_sum", A, W);
    if (A.rows != int(seg.size()))
        throw NumericError("segment_weighted_sum: segment ids mismatch rows");
    for (int32_t s : seg)
        if (s < 0 || s >= num_segments) throw NumericError("segment_weighted_sum: bad segment id");
    Node n;
    n.op = Op::segment_weighted_sum;
    n.a = a;
    n.b = w;
    n.i0 = num_segments;
    n.requires_grad = requires_grad(a) || requires_grad(w);
    n.value = Tensor(num_segments, A.cols);
    for (int r = 0; r < A.rows; ++r) {
        const double s = W.v[size_t(r)];
        double* orow = &n.value.v[size_t(seg[size_t(r)]) * A.cols];
        const double* srow = &A.v[size_t(r) * A.cols];
        for (int c = 0; c < A.cols; ++c) orow[c] += s * srow[c];
    }
    n.idx = std::move(seg);
    return push(std::move(n));
}

Tape::Id Tape::row_sum(Id a) {
    const Tensor& A = value(a);
    Node n;
    n.op = Op::row_sum;
    n.a = a;
    n.requires_grad = requires_grad(a);
    n.value = Tensor(A.rows, 1);
    for (int r = 0; r < A.rows; ++r) {
        double s = 0.0;
        const double* row = &A.v[size_t(r) * A.cols];
        for (int c = 0; c < A.cols; ++c) s += row[c];
        n.value.v[size_t(r)] = s;
    }
    return push(std::move(n));
}

Tape::Id Tape::sum_all(Id a) {
    const Tensor& A = value(a);
    Node n;
    n.op = Op::sum_all;
    n.a = a;
    n.requires_grad = requires_grad(a);
    n.value = Tensor(1, 1);
    double s = 0.0;
    for (double x : A.v) s += x;
    n.value.v[0] = s;
    return push(std::move(n));
}

Tensor& Tape::grad_buf(Id id) {
    Node& n = nodes_[size_t(id)];
    if (n.grad.rows != n.value.rows || n.grad.cols != n.value.cols)
        n.grad = Tensor(n.value.rows, n.value.cols);
    return n.grad;
}

void Tape::backward(Id loss) {
    Node& root = nodes_[size_t(loss)];
    if (root.value.rows != 1 || root.value.cols != 1)
        throw NumericError("backward: loss must be a scalar");
    // Reset gradients of all nodes up to the loss. Grad-requiring nodes get
    // a zeroed buffer even when the loss never reaches them, so callers can
    // always read a correctly shaped (possibly all-zero) gradient.
    for (size_t i = 0; i <= size_t(loss); ++i) {
        Node& n = nodes_[i];
        if (n.requires_grad)
            grad_buf(Id(i));
        if (n.grad.rows != 0) std::fill(n.grad.v.begin(), n.grad.v.end(), 0.0);
    }
    grad_buf(loss).v[0] = 1.0;
    for (size_t i = size_t(loss) + 1; i-- > 0;) backprop_node(i);
}

void Tape::backprop_node(size_t i) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.op == Op::leaf) return;
    if (n.grad.rows == 0) return;  // not reached from the loss
    const Tensor& G = n.grad;

    auto needs = [this](Id id) { return id >= 0 && nodes_[size_t(id)].requires_grad; };

    switch (n.op) {
        case Op::leaf:
            break;
        case Op::matmul: {
            const bool ta = n.i0 != 0, tb = n.i1 != 0;
            const Tensor& A = nodes_[size_t(n.a)].value;
            const Tensor& B = nodes_[size_t(n.b)].value;
            // C = opA(A) opB(B); dA and dB follow the standard transpose rules.
            if (needs(n.a)) {
                Tensor& dA = grad_buf(n.a);
                if (!ta) {
                    // dA += G * opB(B)^T
                    for (int i2 = 0; i2 < dA.rows; ++i2)
                        for (int k = 0; k < G.cols; ++k) {
                            const double g = G.at(i2, k);
                            if (g == 0.0) continue;
                            if (!tb)
                                for (int j = 0; j < dA.cols; ++j) dA.at(i2, j) += g * B.at(j, k);
                            else
                                for (int j = 0; j < dA.cols; ++j) dA.at(i2, j) += g * B.at(k, j);
                        }
                } else {
                    // A is used transposed: dA += opB(B) * G^T, transposed into A's layout.
                    for (int i2 = 0; i2 < G.rows; ++i2)
                        for (int k = 0; k < G.cols; ++k) {
                            const double g = G.at(i2, k);
                            if (g == 0.0) continue;
                            if (!tb)
                                for (int j = 0; j < dA.rows; ++j) dA.at(j, i2) += g * B.at(j, k);
                            else
                                for (int j = 0; j < dA.rows; ++j) dA.at(j, i2) += g * B.at(k, j);
                        }
                }
            }
            if (needs(n.b)) {
                Tensor& dB = grad_buf(n.b);
                if (!tb) {
                    // dB += opA(A)^T * G
                    for (int i2 = 0; i2 < G.rows; ++i2)
                        for (int k = 0; k < dB.cols; ++k) {
                            const double g = G.at(i2, k);
                            if (g == 0.0) continue;
                            if (!ta)
                                for (int j = 0; j < dB.rows; ++j) dB.at(j, k) += g * A.at(i2, j);
                            else
                                for (int j = 0; j < dB.rows; ++j) dB.at(j, k) += g * A.at(j, i2);
                        }
                } else {
                    // B used transposed: dB (in B's layout) += G^T * opA(A).
                    for (int i2 = 0; i2 < G.rows; ++i2)
                        for (int k = 0; k < dB.rows; ++k) {
                            const double g = G.at(i2, k);
                            if (g == 0.0) continue;
                            if (!ta)
                                for (int j = 0; j < dB.cols; ++j) dB.at(k, j) += g * A.at(i2, j);
                            else
                                for (int j = 0; j < dB.cols; ++j) dB.at(k, j) += g * A.at(j, i2);
                        }
                }
            }
            break;
        }
        case Op::add: {
            if (needs(n.a)) {
                Tensor& dA = grad_buf(n.a);
                for (size_t k = 0; k < G.size(); ++k) dA.v[k] += G.v[k];
            }
            if (needs(n.b)) {
                Tensor& dB = grad_buf(n.b);
                for (size_t k = 0; k < G.size(); ++k) dB.v[k] += G.v[k];
            }
            break;
        }
        case Op::sub: {
            if (needs(n.a)) {
                Tensor& dA = grad_buf(n.a);
                for (size_t k = 0; k < G.size(); ++k) dA.v[k] += G.v[k];
            }
            if (needs(n.b)) {
                Tensor& dB = grad_buf(n.b);
                for (size_t k = 0; k < G.size(); ++k) dB.v[k] -= G.v[k];
            }
            break;
        }
        case Op::mul: {
            const Tensor& A = nodes_[size_t(n.a)].value;
            const Tensor& B = nodes_[size_t(n.b)].value;
            if (needs(n.a)) {
                Tensor& dA = grad_buf(n.a);
                for (size_t k = 0; k < G.size(); ++k) dA.v[k] += G.v[k] * B.v[k];
            }
            if (needs(n.b)) {
                Tensor& dB = grad_buf(n.b);
                for (size_t k = 0; k < G.size(); ++k) dB.v[k] += G.v[k] * A.v[k];
            }
            break;
        }
        case Op::scale: {
            if (needs(n.a)) {
                Tensor& dA = grad_buf(n.a);
                for (size_t k = 0; k < G.size(); ++k) dA.v[k] += G.v[k] * n.scalar;
            }
            break;
        }
        case Op::add_scalar: {
            if (needs(n.a)) {
                Tensor& dA = grad_buf(n.a);
                for (size_t k = 0; k < G.size(); ++k) dA.v[k] += G.v[k];
            }
            break;
        }
        case Op::leaky_relu: {
            if (needs(n.a)) {
                const Tensor& A = nodes_[size_t(n.a)].value;
                Tensor& dA = grad_buf(n.a);
                for (size_t k = 0; k < G.size(); ++k)
                    dA.v[k] += G.v[k] * (A.v[k] > 0.0 ? 1.0 : n.scalar);
            }
            break;
        }
        case Op::relu: {
            if (needs(n.a)) {
                const Tensor& A = nodes_[size_t(n.a)].value;
                Tensor& dA = grad_buf(n.a);
                for (size_t k = 0; k < G.size(); ++k)
                    if (A.v[k] > 0.0) dA.v[k] += G.v[k];
            }
            break;
        }
        case Op::concat_rows: {
            const Tensor& A = nodes_[size_t(n.a)].value;
            if (needs(n.a)) {
                Tensor& dA = grad_buf(n.a);
                for (size_t k = 0; k < A.size(); ++k) dA.v[k] += G.v[k];
            }
            if (needs(n.b)) {
                Tensor& dB = grad_buf(n.b);
                for (size_t k = 0; k < dB.size(); ++k) dB.v[k] += G.v[A.size() + k];
            }
            break;
        }
        case Op::concat_cols: {
            const Tensor& A = nodes_[size_t(n.a)].value;
            const Tensor& B = nodes_[size_t(n.b)].value;
            if (needs(n.a)) {
                Tensor& dA = grad_buf(n.a);
                for (int r = 0; r < A.rows; ++r)
                    for (int c = 0; c < A.cols; ++c) dA.at(r, c) += G.at(r, c);
            }
            if (needs(n.b)) {
                Tensor& dB = grad_buf(n.b);
                for (int r = 0; r < B.rows; ++r)
                    for (int c = 0; c < B.cols; ++c) dB.at(r, c) += G.at(r, c + A.cols);
            }
            break;
        }
        case Op::slice_rows: {
            if (needs(n.a)) {
                Tensor& dA = grad_buf(n.a);
                for (int r = 0; r < G.rows; ++r)
                    for (int c = 0; c < G.cols; ++c) dA.at(r + n.i0, c) += G.at(r, c);
            }
            break;
        }
        case Op::slice_cols: {
            if (needs(n.a)) {
                Tensor& dA = grad_buf(n.a);
                for (int r = 0; r < G.rows; ++r)
                    for (int c = 0; c < G.cols; ++c) dA.at(r, c + n.i0) += G.at(r, c);
            }
            break;
        }
        case Op::gather_rows: {
            if (needs(n.a)) {
                Tensor& dA = grad_buf(n.a);
                for (size_t r = 0; r < n.idx.size(); ++r) {
                    double* drow = &dA.v[size_t(n.idx[r]) * dA.cols];
                    const double* grow = &G.v[r * size_t(G.cols)];
                    for (int c = 0; c < G.cols; ++c) drow[c] += grow[c];
                }
            }
            break;
        }
        case Op::gather_rows_sum: {
            for (size_t t = 0; t < n.extra_parents.size(); ++t) {
                const Id src = n.extra_parents[t];
                if (!needs(src)) continue;
                Tensor& dS = grad_buf(src);
                const auto& ids = n.idxs[t];
                for (size_t r = 0; r < ids.size(); ++r) {
                    double* drow = &dS.v[size_t(ids[r]) * dS.cols];
                    const double* grow = &G.v[r * size_t(G.cols)];
                    for (int c = 0; c < G.cols; ++c) drow[c] += grow[c];
                }
            }
            break;
        }
        case Op::scale_rows: {
            const Tensor& A = nodes_[size_t(n.a)].value;
            const Tensor& W = nodes_[size_t(n.b)].value;
            if (needs(n.a)) {
                Tensor& dA = grad_buf(n.a);
                for (int r = 0; r < A.rows; ++r) {
                    const double s = W.v[size_t(r)];
                    for (int c = 0; c < A.cols; ++c) dA.at(r, c) += G.at(r, c) * s;
                }
            }
            if (needs(n.b)) {
                Tensor& dW = grad_buf(n.b);
                for (int r = 0; r < A.rows; ++r) {
                    double s = 0.0;
                    for (int c = 0; c < A.cols; ++c) s += G.at(r, c) * A.at(r, c);
                    dW.v[size_t(r)] += s;
                }
            }
            break;
        }
        case Op::segment_softmax: {
            if (needs(n.a)) {
                const Tensor& Y = n.value;
                Tensor& dL = grad_buf(n.a);
                std::vector<double> seg_dot(size_t(n.i0), 0.0);
                for (int r = 0; r < Y.rows; ++r)
                    seg_dot[size_t(n.idx[size_t(r)])] += G.v[size_t(r)] * Y.v[size_t(r)];
                for (int r = 0; r < Y.rows; ++r)
                    dL.v[size_t(r)] +=
                        Y.v[size_t(r)] * (G.v[size_t(r)] - seg_dot[size_t(n.idx[size_t(r)])]);
            }
            break;
        }
        case Op::segment_sum: {
            if (needs(n.a)) {
                Tensor& dA = grad_buf(n.a);
                for (size_t r = 0; r < n.idx.size(); ++r) {
                    const double* grow = &G.v[size_t(n.idx[r]) * G.cols];
                    double* drow = &dA.v[r * size_t(dA.cols)];
                    for (int c = 0; c < G.cols; ++c) drow[c] += grow[c];
                }
            }
            break;
        }
        case Op::segment_weighted_sum: {
            const Tensor& A = nodes_[size_t(n.a)].value;
            const Tensor& W = nodes_[size_t(n.b)].value;
            if (needs(n.a)) {
                Tensor& dA = grad_buf(n.a);
                for (size_t r = 0; r < n.idx.size(); ++r) {
                    const double s = W.v[r];
                    const double* grow = &G.v[size_t(n.idx[r]) * G.cols];
                    double* drow = &dA.v[r * size_t(dA.cols)];
                    for (int c = 0; c < G.cols; ++c) drow[c] += s * grow[c];
                }
            }
            if (needs(n.b)) {
                Tensor& dW = grad_buf(n.b);
                for (size_t r = 0; r < n.idx.size(); ++r) {
                    const double* grow = &G.v[size_t(n.idx[r]) * G.cols];
                    const double* arow = &A.v[r * size_t(A.cols)];
                    double s = 0.0;
                    for (int c = 0; c < A.cols; ++c) s += grow[c] * arow[c];
                    dW.v[r] += s;
                }
            }
            break;
        }
        case Op::row_sum: {
            if (needs(n.a)) {
                Tensor& dA = grad_buf(n.a);
                for (int r = 0; r < dA.rows; ++r) {
                    const double g = G.v[size_t(r)];
                    for (int c = 0; c < dA.cols; ++c) dA.at(r, c) += g;
                }
            }
            break;
        }
        case Op::sum_all: {
            if (needs(n.a)) {
                Tensor& dA = grad_buf(n.a);
                const double g = G.v[0];
                for (auto& x : dA.v) x += g;
            }
            break;
        }
    }
}

}  // namespace ingram
