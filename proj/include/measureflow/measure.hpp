#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace mflow {

using Point = std::vector<double>;

/// Canonicalization applied when a measure is built: positions are rounded to
/// `digits` decimals so that equal positions compare exactly, and atoms with
/// weight at or below `weight_floor` are dropped. A negative `digits` disables
/// the rounding.
struct MergePolicy {
    int digits = 12;
    double weight_floor = 1e-15;
};

double quantize_coordinate(double x, int digits);

/// Sum of `values` rounded once from the exact (error-free expansion) total, so
/// the result does not depend on summation order and equals the true sum
/// whenever that sum is representable.
double exact_sum(std::span<const double> values);

/// Finite nonnegative atomic measure sum_i w_i delta_{x_i} on R^n.
///
/// Atoms are stored sorted lexicographically by position with duplicates merged,
/// so two measures with the same atoms have identical storage. Values are
/// immutable after construction.
class DiscreteMeasure {
public:
    explicit DiscreteMeasure(std::size_t dim = 1);

    /// `positions` holds dim coordinates per atom, back to back.
    DiscreteMeasure(std::size_t dim, std::span<const double> positions, std::span<const double> weights,
                    const MergePolicy& policy = {});

    static DiscreteMeasure dirac(const Point& x, double weight = 1.0);
    static DiscreteMeasure from_atoms(std::size_t dim, const std::vector<std::pair<Point, double>>& atoms,
                                      const MergePolicy& policy = {});

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return weights_.size(); }
    bool empty() const { return weights_.empty(); }

    std::span<const double> position(std::size_t i) const { return {positions_.data() + i * dim_, dim_}; }
    double weight(std::size_t i) const { return weights_[i]; }
    const std::vector<double>& weights() const { return weights_; }
    const std::vector<double>& positions() const { return positions_; }

    double mass() const;
    /// max |x| over the support; 0 for the empty measure.
    double support_radius() const;

    /// Right-continuous distribution function mu((-inf, x]); dim must be 1.
    double cdf(double x) const;
    /// Left limit mu((-inf, x)); dim must be 1.
    double cdf_left(double x) const;

    double integrate(const std::function<double(std::span<const double>)>& f) const;

    /// Weight of the atom located exactly at x (after quantization), 0 if absent.
    double weight_at(std::span<const double> x) const;

    bool operator==(const DiscreteMeasure& other) const = default;

private:
    std::size_t dim_;
    std::vector<double> positions_;
    std::vector<double> weights_;
};

using PointMap = std::function<Point(std::span<const double>)>;

DiscreteMeasure pushforward(const DiscreteMeasure& m, const PointMap& map, const MergePolicy& policy = {});
DiscreteMeasure add(const DiscreteMeasure& a, const DiscreteMeasure& b, const MergePolicy& policy = {});
DiscreteMeasure scale(const DiscreteMeasure& m, double k, const MergePolicy& policy = {});
/// Keeps the atoms whose position satisfies `keep`.
DiscreteMeasure restrict_to(const DiscreteMeasure& m, const std::function<bool(std::span<const double>)>& keep);

/// Atomwise minimum of two measures (the largest measure dominated by both).
DiscreteMeasure common_part(const DiscreteMeasure& a, const DiscreteMeasure& b);

/// Atomic measure sum w delta_{(x, v)} on the tangent bundle TR^n = R^n x R^n.
///
/// Stored as a DiscreteMeasure of dimension 2n over concatenated (x, v), which
/// is also the representation used when the lifted measure is compared as a
/// measure on R^{2n}.
class LiftedMeasure {
public:
    explicit LiftedMeasure(std::size_t dim = 1) : dim_(dim), joint_(2 * dim) {}
    LiftedMeasure(std::size_t dim, std::span<const double> bases, std::span<const double> velocities,
                  std::span<const double> weights, const MergePolicy& policy = {});
    LiftedMeasure(std::size_t dim, DiscreteMeasure joint);

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return joint_.size(); }
    bool empty() const { return joint_.empty(); }
    std::span<const double> base(std::size_t i) const { return joint_.position(i).first(dim_); }
    std::span<const double> velocity(std::size_t i) const { return joint_.position(i).last(dim_); }
    double weight(std::size_t i) const { return joint_.weight(i); }
    double mass() const { return joint_.mass(); }
    /// max |v| over the support.
    double max_speed() const;

    const DiscreteMeasure& joint() const { return joint_; }

    bool operator==(const LiftedMeasure& other) const = default;

private:
    std::size_t dim_;
    DiscreteMeasure joint_;
};

/// Marginal on the base space, pi(x, v) = x.
DiscreteMeasure base_projection(const LiftedMeasure& v, const MergePolicy& policy = {});

/// A sub-measure kept <= original together with the removed mass |original - kept|.
struct SignedDecomposition {
    DiscreteMeasure kept;
    double removed_mass = 0.0;
};

double euclidean_distance(std::span<const double> a, std::span<const double> b);
double euclidean_norm(std::span<const double> a);

}  // namespace mflow
