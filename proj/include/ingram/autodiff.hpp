#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ingram/tensor.hpp"

namespace ingram {

// Reverse-mode differentiation over 2-D double tensors. A Tape owns the
// computation graph; ops append nodes and return ids. backward() fills the
// gradient of every node that (transitively) depends on a grad-requiring
// leaf. Reductions run in ascending index order, so results are bit-stable
// for a fixed input.
//
// Every op validates shapes and checks its output for NaN/Inf, raising
// NumericError with the op name.
class Tape {
public:
    using Id = int32_t;

    Tape() = default;

    // Leaves.
    Id input(Tensor t, bool requires_grad = false);
    Id param(const Tensor& t) { return input(t, true); }

    // out = op_a(A) * op_b(B), where op_x transposes when the flag is set.
    Id matmul(Id a, Id b, bool trans_a = false, bool trans_b = false);

    Id add(Id a, Id b);
    Id sub(Id a, Id b);
    Id mul(Id a, Id b);  // elementwise
    Id scale(Id a, double c);
    Id add_scalar(Id a, double c);
    Id leaky_relu(Id a, double negative_slope);
    Id relu(Id a);

    Id concat_rows(Id a, Id b);
    Id concat_cols(Id a, Id b);
    Id slice_rows(Id a, int r0, int r1);  // half-open [r0, r1)
    Id slice_cols(Id a, int c0, int c1);

    // out.row(r) = a.row(ids[r]).
    Id gather_rows(Id a, std::vector<int32_t> ids);
    // out = sum over pairs of gather_rows(tensor, ids); all gathered shapes equal.
    Id gather_rows_sum(const std::vector<std::pair<Id, const std::vector<int32_t>*>>& terms);
    // out.row(r) = a.row(r) * w[r]; w is [rows x 1].
    Id scale_rows(Id a, Id w);

    // Softmax of a [p x 1] column within each segment; max-shifted for
    // stability. seg[r] in [0, num_segments).
    Id segment_softmax(Id logits, std::vector<int32_t> seg, int num_segments);
    // out.row(s) = sum of a.row(r) over r with seg[r] == s.
    Id segment_sum(Id a, std::vector<int32_t> seg, int num_segments);
    // Fused scale_rows + segment_sum: out.row(s) = sum w[r] * a.row(r).
    Id segment_weighted_sum(Id a, Id w, std::vector<int32_t> seg, int num_segments);

    Id row_sum(Id a);  // [p x q] -> [p x 1]
    Id sum_all(Id a);  // -> [1 x 1]

    const Tensor& value(Id id) const { return nodes_[size_t(id)].value; }
    const Tensor& grad(Id id) const { return nodes_[size_t(id)].grad; }
    bool requires_grad(Id id) const { return nodes_[size_t(id)].requires_grad; }

    // Backpropagates from a [1 x 1] loss node.
    void backward(Id loss);

    size_t num_nodes() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

private:
    enum class Op {
        leaf,
        matmul,
        add,
        sub,
        mul,
        scale,
        add_scalar,
        leaky_relu,
        relu,
        concat_rows,
        concat_cols,
        slice_rows,
        slice_cols,
        gather_rows,
        gather_rows_sum,
        scale_rows,
        segment_softmax,
        segment_sum,
        segment_weighted_sum,
        row_sum,
        sum_all,
    };

    struct Node {
        Op op = Op::leaf;
        Tensor value;
        Tensor grad;  // sized lazily in backward()
        bool requires_grad = false;
        Id a = -1, b = -1;
        std::vector<Id> extra_parents;           // gather_rows_sum
        double scalar = 0.0;                     // scale / add_scalar / leaky slope
        int i0 = 0, i1 = 0;                      // slices, transpose flags, num_segments
        std::vector<int32_t> idx;                // gather ids / segment ids
        std::vector<std::vector<int32_t>> idxs;  // gather_rows_sum id lists
    };

    Id push(Node n);
    static const char* op_name(Op op);
    void check_finite(const Node& n) const;
    Tensor& grad_buf(Id id);
    void backprop_node(size_t i);

    std::vector<Node> nodes_;
};

}  // namespace ingram
