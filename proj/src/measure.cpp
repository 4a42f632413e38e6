#include "measureflow/measure.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "measureflow/errors.hpp"

namespace mflow {

double quantize_coordinate(double x, int digits) {
    if (!std::isfinite(x)) throw std::invalid_argument("non-finite coordinate");
    if (digits < 0) return x + 0.0;
    const double s = std::pow(10.0, digits);
    const double scaled = x * s;
    // Beyond 2^53 the rounding is the identity.
    if (std::abs(scaled) >= 9.0e15) return x + 0.0;
    return std::round(scaled) / s + 0.0;
}

double exact_sum(std::span<const double> values) {
    // Shewchuk's grow-expansion: the components are nonoverlapping and their
    // exact sum equals the exact sum of the inputs.
    std::vector<double> expansion;
    expansion.reserve(8);
    for (double x : values) {
        double q = x;
        std::size_t kept = 0;
        for (double e : expansion) {
            const double s = q + e;
            const double bv = s - q;
            const double err = (q - (s - bv)) + (e - bv);
            if (err != 0.0) expansion[kept++] = err;
            q = s;
        }
        expansion.resize(kept);
        if (q != 0.0) expansion.push_back(q);
    }
    double s = 0.0;
    for (double e : expansion) s += e;
    return s;
}

namespace {

bool less_at(std::span<const double> a, std::span<const double> b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

bool equal_at(std::span<const double> a, std::span<const double> b) { return std::equal(a.begin(), a.end(), b.begin()); }

}  // namespace

DiscreteMeasure::DiscreteMeasure(std::size_t dim) : dim_(dim) {
    if (dim == 0) throw std::invalid_argument("measure dimension must be positive");
}

DiscreteMeasure::DiscreteMeasure(std::size_t dim, std::span<const double> positions, std::span<const double> weights,
                                 const MergePolicy& policy)
    : dim_(dim) {
    if (dim == 0) throw std::invalid_argument("measure dimension must be positive");
    if (positions.size() != weights.size() * dim)
        throw DimensionMismatch("position array does not match dim * atom count");

    std::vector<double> q(positions.size());
    for (std::size_t k = 0; k < positions.size(); ++k) q[k] = quantize_coordinate(positions[k], policy.digits);

    std::vector<std::size_t> order;
    order.reserve(weights.size());
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double w = weights[i];
        if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("atom weights must be finite and nonnegative");
        if (w > 0.0) order.push_back(i);
    }
    auto at = [&](std::size_t i) { return std::span<const double>(q.data() + i * dim, dim); };
    // Stable sort fixes the summation order of merged duplicates.
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return less_at(at(a), at(b)); });

    for (std::size_t k = 0; k < order.size();) {
        std::size_t e = k;
        while (e < order.size() && equal_at(at(order[k]), at(order[e]))) ++e;
        double w = weights[order[k]];
        if (e - k > 1) {
            std::vector<double> group;
            group.reserve(e - k);
            for (std::size_t t = k; t < e; ++t) group.push_back(weights[order[t]]);
            w = exact_sum(group);
        }
        if (w > policy.weight_floor) {
            auto p = at(order[k]);
            positions_.insert(positions_.end(), p.begin(), p.end());
            weights_.push_back(w);
        }
        k = e;
    }
}

DiscreteMeasure DiscreteMeasure::dirac(const Point& x, double weight) {
    return DiscreteMeasure(x.size(), x, std::span<const double>(&weight, 1));
}

DiscreteMeasure DiscreteMeasure::from_atoms(std::size_t dim, const std::vector<std::pair<Point, double>>& atoms,
                                            const MergePolicy& policy) {
    std::vector<double> pos;
    std::vector<double> w;
    pos.reserve(atoms.size() * dim);
    for (const auto& [x, m] : atoms) {
        if (x.size() != dim) throw DimensionMismatch("atom position has wrong dimension");
        pos.insert(pos.end(), x.begin(), x.end());
        w.push_back(m);
    }
    return DiscreteMeasure(dim, pos, w, policy);
}

double DiscreteMeasure::mass() const { return exact_sum(weights_); }

double DiscreteMeasure::support_radius() const {
    double r = 0.0;
    for (std::size_t i = 0; i < size(); ++i) r = std::max(r, euclidean_norm(position(i)));
    return r;
}

double DiscreteMeasure::cdf(double x) const {
    if (dim_ != 1) throw DimensionMismatch("cdf requires a one-dimensional measure");
    double s = 0.0;
    for (std::size_t i = 0; i < size() && positions_[i] <= x; ++i) s += weights_[i];
    return s;
}

double DiscreteMeasure::cdf_left(double x) const {
    if (dim_ != 1) throw DimensionMismatch("cdf requires a one-dimensional measure");
    double s = 0.0;
    for (std::size_t i = 0; i < size() && positions_[i] < x; ++i) s += weights_[i];
    return s;
}

double DiscreteMeasure::integrate(const std::function<double(std::span<const double>)>& f) const {
    double s = 0.0;
    for (std::size_t i = 0; i < size(); ++i) s += weights_[i] * f(position(i));
    return s;
}

double DiscreteMeasure::weight_at(std::span<const double> x) const {
    if (x.size() != dim_) throw DimensionMismatch("query point has wrong dimension");
    Point q(x.begin(), x.end());
    for (auto& c : q) c = quantize_coordinate(c, MergePolicy{}.digits);
    std::size_t lo = 0, hi = size();
    while (lo < hi) {
        const std::size_t mid = (lo + hi) / 2;
        if (less_at(position(mid), q))
            lo = mid + 1;
        else
            hi = mid;
    }
    if (lo < size() && equal_at(position(lo), q)) return weights_[lo];
    return 0.0;
}

DiscreteMeasure pushforward(const DiscreteMeasure& m, const PointMap& map, const MergePolicy& policy) {
    std::vector<double> pos;
    pos.reserve(m.positions().size());
    for (std::size_t i = 0; i < m.size(); ++i) {
        Point y = map(m.position(i));
        if (y.size() != m.dim()) throw DimensionMismatch("pushforward map changed the dimension");
        pos.insert(pos.end(), y.begin(), y.end());
    }
    return DiscreteMeasure(m.dim(), pos, m.weights(), policy);
}

DiscreteMeasure add(const DiscreteMeasure& a, const DiscreteMeasure& b, const MergePolicy& policy) {
    if (a.dim() != b.dim()) throw DimensionMismatch("cannot add measures of different dimension");
    std::vector<double> pos = a.positions();
    pos.insert(pos.end(), b.positions().begin(), b.positions().end());
    std::vector<double> w = a.weights();
    w.insert(w.end(), b.weights().begin(), b.weights().end());
    return DiscreteMeasure(a.dim(), pos, w, policy);
}

DiscreteMeasure scale(const DiscreteMeasure& m, double k, const MergePolicy& policy) {
    if (!(k >= 0.0)) throw std::invalid_argument("scale factor must be nonnegative");
    std::vector<double> w = m.weights();
    for (auto& x : w) x *= k;
    return DiscreteMeasure(m.dim(), m.positions(), w, policy);
}

DiscreteMeasure restrict_to(const DiscreteMeasure& m, const std::function<bool(std::span<const double>)>& keep) {
    std::vector<double> pos;
    std::vector<double> w;
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (!keep(m.position(i))) continue;
        auto p = m.position(i);
        pos.insert(pos.end(), p.begin(), p.end());
        w.push_back(m.weight(i));
    }
    return DiscreteMeasure(m.dim(), pos, w, MergePolicy{-1, 0.0});
}

DiscreteMeasure common_part(const DiscreteMeasure& a, const DiscreteMeasure& b) {
    if (a.dim() != b.dim()) throw DimensionMismatch("dimension mismatch");
    std::vector<double> pos;
    std::vector<double> w;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (less_at(a.position(i), b.position(j))) {
            ++i;
        } else if (less_at(b.position(j), a.position(i))) {
            ++j;
        } else {
            auto p = a.position(i);
            pos.insert(pos.end(), p.begin(), p.end());
            w.push_back(std::min(a.weight(i), b.weight(j)));
            ++i;
            ++j;
        }
    }
    return DiscreteMeasure(a.dim(), pos, w, MergePolicy{-1, 0.0});
}

LiftedMeasure::LiftedMeasure(std::size_t dim, std::span<const double> bases, std::span<const double> velocities,
                             std::span<const double> weights, const MergePolicy& policy)
    : dim_(dim), joint_(2 * dim) {
    if (bases.size() != weights.size() * dim || velocities.size() != weights.size() * dim)
        throw DimensionMismatch("lifted atom arrays do not match dim * atom count");
    std::vector<double> joint;
    joint.reserve(2 * bases.size());
    for (std::size_t i = 0; i < weights.size(); ++i) {
        joint.insert(joint.end(), bases.begin() + i * dim, bases.begin() + (i + 1) * dim);
        joint.insert(joint.end(), velocities.begin() + i * dim, velocities.begin() + (i + 1) * dim);
    }
    joint_ = DiscreteMeasure(2 * dim, joint, weights, policy);
}

LiftedMeasure::LiftedMeasure(std::size_t dim, DiscreteMeasure joint) : dim_(dim), joint_(std::move(joint)) {
    if (joint_.dim() != 2 * dim) throw DimensionMismatch("joint measure must have dimension 2n");
}

double LiftedMeasure::max_speed() const {
    double s = 0.0;
    for (std::size_t i = 0; i < size(); ++i) s = std::max(s, euclidean_norm(velocity(i)));
    return s;
}

DiscreteMeasure base_projection(const LiftedMeasure& v, const MergePolicy& policy) {
    std::vector<double> pos;
    pos.reserve(v.size() * v.dim());
    for (std::size_t i = 0; i < v.size(); ++i) {
        auto b = v.base(i);
        pos.insert(pos.end(), b.begin(), b.end());
    }
    return DiscreteMeasure(v.dim(), pos, v.joint().weights(), policy);
}

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() == 1) return std::abs(a[0] - b[0]);
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
    return std::sqrt(s);
}

double euclidean_norm(std::span<const double> a) {
    if (a.size() == 1) return std::abs(a[0]);
    double s = 0.0;
    for (double x : a) s += x * x;
    return std::sqrt(s);
}

MassMismatch::MassMismatch(double mass1, double mass2)
    : std::invalid_argument("mass mismatch: " + std::to_string(mass1) + " vs " + std::to_string(mass2)),
      mass1_(mass1),
      mass2_(mass2) {}

}  // namespace mflow
