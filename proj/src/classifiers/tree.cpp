#include <algorithm>
#include <cfloat>
#include <numeric>

#include "internal.hpp"

namespace mpt::detail {

Presorted Presorted::build(const RowMatrix& z) {
    Presorted p;
    const auto n = static_cast<int>(z.rows());
    p.order.resize(static_cast<std::size_t>(z.cols()));
    for (Eigen::Index f = 0; f < z.cols(); ++f) {
        auto& o = p.order[static_cast<std::size_t>(f)];
        o.resize(static_cast<std::size_t>(n));
        std::iota(o.begin(), o.end(), 0);
        std::stable_sort(o.begin(), o.end(), [&](int a, int b) { return z(a, f) < z(b, f); });
    }
    return p;
}

int leaf_index(const DecisionTree& tree, const double* z) {
    int i = 0;
    while (tree.nodes[static_cast<std::size_t>(i)].feature >= 0) {
        const auto& n = tree.nodes[static_cast<std::size_t>(i)];
        i = z[n.feature] <= n.threshold ? n.left : n.right;
    }
    return i;
}

namespace {

struct Split {
    int feature = -1;
    int pos = -1;  // last left position in the feature's order
    double proxy = 0.0;
};

// Node statistics and split scoring for weighted Gini.
struct Gini {
    const std::vector<int>& labels;
    const std::vector<double>& weights;
    int k;
    std::vector<double> total, left;

    Gini(const std::vector<int>& l, const std::vector<double>& w, int classes)
        : labels(l), weights(w), k(classes), total(static_cast<std::size_t>(classes)), left(static_cast<std::size_t>(classes)) {}

    void node(const int* idx, int n, TreeNode& out) {
        std::fill(total.begin(), total.end(), 0.0);
        for (int i = 0; i < n; ++i) total[static_cast<std::size_t>(labels[static_cast<std::size_t>(idx[i])])] += weights[static_cast<std::size_t>(idx[i])];
        const double w = std::accumulate(total.begin(), total.end(), 0.0);
        double sq = 0;
        out.value.resize(total.size());
        for (std::size_t c = 0; c < total.size(); ++c) {
            out.value[c] = total[c] / w;
            sq += out.value[c] * out.value[c];
        }
        out.weight = w;
        out.impurity = 1.0 - sq;
    }

    template <class Accept>
    void scan(const int* idx, int n, const RowMatrix& z, int f, Accept&& accept) {
        std::fill(left.begin(), left.end(), 0.0);
        double sq_left = 0, sq_right = 0, w_left = 0, w_all = 0;
        for (double t : total) sq_right += t * t, w_all += t;
        for (int i = 0; i + 1 < n; ++i) {
            const auto s = static_cast<std::size_t>(idx[i]);
            const auto c = static_cast<std::size_t>(labels[s]);
            const double w = weights[s];
            const double l0 = left[c], r0 = total[c] - left[c];
            sq_left += (l0 + w) * (l0 + w) - l0 * l0;
            sq_right += (r0 - w) * (r0 - w) - r0 * r0;
            left[c] += w;
            w_left += w;
            if (z(idx[i], f) < z(idx[i + 1], f)) accept(i, [&] { return sq_left / w_left + sq_right / (w_all - w_left); });
        }
    }
};

// Least squares with the Friedman improvement proxy.
struct Friedman {
    const std::vector<double>& target;
    double sum = 0;

    explicit Friedman(const std::vector<double>& t) : target(t) {}

    void node(const int* idx, int n, TreeNode& out) {
        sum = 0;
        double sq = 0;
        for (int i = 0; i < n; ++i) {
            const double y = target[static_cast<std::size_t>(idx[i])];
            sum += y;
            sq += y * y;
        }
        const double mean = sum / n;
        out.value = {mean};
        out.weight = n;
        out.impurity = std::max(0.0, sq / n - mean * mean);
    }

    template <class Accept>
    void scan(const int* idx, int n, const RowMatrix& z, int f, Accept&& accept) {
        double sum_left = 0;
        for (int i = 0; i + 1 < n; ++i) {
            sum_left += target[static_cast<std::size_t>(idx[i])];
            if (z(idx[i], f) < z(idx[i + 1], f)) {
                accept(i, [&] {
                    const double nl = i + 1.0, nr = n - nl;
                    const double diff = nr * sum_left - nl * (sum - sum_left);
                    return diff * diff / (nl * nr);
                });
            }
        }
    }
};

template <class Criterion>
DecisionTree grow(const RowMatrix& z, const Presorted& sorted, const std::vector<double>* weights, const TreeGrowth& g,
                  Rng* rng, Criterion& crit) {
    const int n_features = static_cast<int>(z.cols());
    // Working copies of the sorted orders, restricted to active samples.
    std::vector<std::vector<int>> order(static_cast<std::size_t>(n_features));
    for (int f = 0; f < n_features; ++f) {
        const auto& src = sorted.order[static_cast<std::size_t>(f)];
        auto& dst = order[static_cast<std::size_t>(f)];
        dst.reserve(src.size());
        for (int s : src)
            if (!weights || (*weights)[static_cast<std::size_t>(s)] > 0.0) dst.push_back(s);
    }
    const int n_active = order.empty() ? 0 : static_cast<int>(order.front().size());
    std::vector<char> goes_left(static_cast<std::size_t>(z.rows()), 0);
    std::vector<int> buffer(static_cast<std::size_t>(n_active));
    std::vector<int> features(static_cast<std::size_t>(n_features));
    std::iota(features.begin(), features.end(), 0);

    DecisionTree tree;
    struct Pending {
        int node, begin, end, depth;
    };
    std::vector<Pending> stack;
    tree.nodes.emplace_back();
    stack.push_back({0, 0, n_active, 0});

    while (!stack.empty()) {
        const Pending p = stack.back();
        stack.pop_back();
        const int n = p.end - p.begin;
        TreeNode node;
        crit.node(order[0].data() + p.begin, n, node);

        bool leaf = node.impurity <= DBL_EPSILON || n < g.min_samples_split || n < 2 * g.min_samples_leaf ||
                    (g.max_depth > 0 && p.depth >= g.max_depth);
        Split best;
        if (!leaf) {
            int limit = n_features;
            if (g.max_features > 0 && g.max_features < n_features) {
                std::shuffle(features.begin(), features.end(), *rng);
                limit = g.max_features;
            }
            int visited = 0;
            for (int fi = 0; fi < n_features && visited < limit; ++fi) {
                const int f = features[static_cast<std::size_t>(fi)];
                const int* idx = order[static_cast<std::size_t>(f)].data() + p.begin;
                if (!(z(idx[0], f) < z(idx[n - 1], f))) continue;  // constant here
                ++visited;
                crit.scan(idx, n, z, f, [&](int i, auto proxy) {
                    const int left_n = i + 1;
                    if (left_n < g.min_samples_leaf || n - left_n < g.min_samples_leaf) return;
                    const double v = proxy();
                    if (best.feature < 0 || v > best.proxy) best = {f, p.begin + i, v};
                });
            }
            leaf = best.feature < 0;
        }
        if (leaf) {
            tree.nodes[static_cast<std::size_t>(p.node)] = std::move(node);
            continue;
        }
        const auto& bo = order[static_cast<std::size_t>(best.feature)];
        const double a = z(bo[static_cast<std::size_t>(best.pos)], best.feature);
        const double b = z(bo[static_cast<std::size_t>(best.pos) + 1], best.feature);
        double threshold = a / 2.0 + b / 2.0;
        if (!(threshold < b)) threshold = a;
        for (int i = p.begin; i < p.end; ++i) goes_left[static_cast<std::size_t>(bo[static_cast<std::size_t>(i)])] = i <= best.pos;
        for (auto& o : order) {
            int l = p.begin, r = 0;
            for (int i = p.begin; i < p.end; ++i) {
                const int s = o[static_cast<std::size_t>(i)];
                if (goes_left[static_cast<std::size_t>(s)]) o[static_cast<std::size_t>(l++)] = s;
                else buffer[static_cast<std::size_t>(r++)] = s;
            }
            std::copy(buffer.begin(), buffer.begin() + r, o.begin() + l);
        }
        const int mid = best.pos + 1;
        node.feature = best.feature;
        node.threshold = threshold;
        const int left = static_cast<int>(tree.nodes.size());
        node.left = left;
        node.right = left + 1;
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();
        tree.nodes[static_cast<std::size_t>(p.node)] = std::move(node);
        // right first so the left subtree is expanded next (depth first)
        stack.push_back({left + 1, mid, p.end, p.depth + 1});
        stack.push_back({left, p.begin, mid, p.depth + 1});
    }
    return tree;
}

}  // namespace

DecisionTree grow_classification_tree(const RowMatrix& z, const std::vector<int>& labels, int num_classes,
                                      const std::vector<double>& weights, const Presorted& sorted,
                                      const TreeGrowth& g, Rng* rng) {
    Gini crit(labels, weights, num_classes);
    return grow(z, sorted, &weights, g, rng, crit);
}

DecisionTree grow_regression_tree(const RowMatrix& z, const std::vector<double>& target, const Presorted& sorted,
                                  const TreeGrowth& g) {
    Friedman crit(target);
    TreeGrowth plain = g;
    plain.max_features = 0;
    return grow(z, sorted, nullptr, plain, nullptr, crit);
}

void prune_cost_complexity(DecisionTree& tree, double alpha) {
    auto& nodes = tree.nodes;
    if (nodes.empty()) return;
    const double w_root = nodes[0].weight;
    const std::size_t n = nodes.size();
    std::vector<double> r_sub(n);
    std::vector<int> leaves(n);
    std::vector<char> reachable(n);
    for (;;) {
        for (std::size_t i = n; i-- > 0;) {
            const auto& node = nodes[i];
            if (node.feature < 0) {
                r_sub[i] = node.impurity * node.weight / w_root;
                leaves[i] = 1;
            } else {
                const auto l = static_cast<std::size_t>(node.left), r = static_cast<std::size_t>(node.right);
                r_sub[i] = r_sub[l] + r_sub[r];
                leaves[i] = leaves[l] + leaves[r];
            }
        }
        std::fill(reachable.begin(), reachable.end(), 0);
        reachable[0] = 1;
        std::size_t weakest = n;
        double g_min = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!reachable[i] || nodes[i].feature < 0) continue;
            reachable[static_cast<std::size_t>(nodes[i].left)] = 1;
            reachable[static_cast<std::size_t>(nodes[i].right)] = 1;
            const double g = (nodes[i].impurity * nodes[i].weight / w_root - r_sub[i]) / (leaves[i] - 1);
            if (weakest == n || g < g_min) weakest = i, g_min = g;
        }
        if (weakest == n || g_min > alpha) break;
        nodes[weakest].feature = -1;
        nodes[weakest].left = nodes[weakest].right = -1;
    }
    // compact in preorder, which keeps parents ahead of children
    std::vector<TreeNode> kept;
    std::vector<std::pair<std::size_t, int>> stack = {{0, -1}};
    while (!stack.empty()) {
        auto [i, parent_slot] = stack.back();
        stack.pop_back();
        const auto self = static_cast<int>(kept.size());
        kept.push_back(nodes[i]);
        if (parent_slot >= 0) {
            auto& parent = kept[static_cast<std::size_t>(parent_slot >> 1)];
            (parent_slot & 1 ? parent.right : parent.left) = self;
        }
        if (nodes[i].feature >= 0) {
            stack.push_back({static_cast<std::size_t>(nodes[i].right), self << 1 | 1});
            stack.push_back({static_cast<std::size_t>(nodes[i].left), self << 1});
        }
    }
    nodes = std::move(kept);
}

}  // namespace mpt::detail
