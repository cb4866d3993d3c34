#include "fdelab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <Eigen/Dense>

namespace fdelab {

namespace {

constexpr std::size_t kMinResolution = 8;

double cell_measure(double lo, double hi, int dim) {
    return (std::pow(hi, dim) - std::pow(lo, dim)) / dim;
}

void validate(const GridDescriptor& d) {
    if (!(d.a < d.b) || d.a < 0.0 || !std::isfinite(d.a) || !std::isfinite(d.b))
        throw Error(ErrorCode::InvalidGeometry, "need 0 <= a < b");
    if (d.dim < 1) throw Error(ErrorCode::InvalidGeometry, "dimension must be >= 1");
    if (d.n < kMinResolution)
        throw Error(ErrorCode::ResolutionTooSmall, "need at least 8 nodes per direction");
    switch (d.shape) {
        case Shape::Interval:
            if (d.dim != 1) throw Error(ErrorCode::InvalidGeometry, "interval has dim 1");
            break;
        case Shape::Radial:
            break;
        case Shape::Polar2d:
            if (d.dim != 2) throw Error(ErrorCode::InvalidGeometry, "polar2d has dim 2");
            if (d.a <= 0.0) throw Error(ErrorCode::InvalidGeometry, "polar2d needs a > 0");
            if (d.n_theta < kMinResolution)
                throw Error(ErrorCode::ResolutionTooSmall, "need at least 8 angular nodes");
            if (d.n_theta % 2 != 0)
                throw Error(ErrorCode::InvalidGeometry, "n_theta must be even");
            break;
    }
}

}  // namespace

std::string_view to_string(Shape shape) noexcept {
    switch (shape) {
        case Shape::Interval: return "interval";
        case Shape::Radial: return "radial";
        case Shape::Polar2d: return "polar2d";
    }
    return "unknown";
}

Shape shape_from_string(std::string_view name) {
    if (name == "interval") return Shape::Interval;
    if (name == "radial" || name == "ball" || name == "annulus") return Shape::Radial;
    if (name == "polar2d" || name == "polar") return Shape::Polar2d;
    throw Error(ErrorCode::MalformedConfig, "unknown domain '" + std::string(name) + "'");
}

GridDescriptor GridDescriptor::interval(double a, double b, std::size_t n) {
    return {Shape::Interval, 1, a, b, n, 1};
}

GridDescriptor GridDescriptor::radial(int dim, double a, double b, std::size_t n) {
    return {Shape::Radial, dim, a, b, n, 1};
}

GridDescriptor GridDescriptor::polar2d(double a, double b, std::size_t n_r, std::size_t n_theta) {
    return {Shape::Polar2d, 2, a, b, n_r, n_theta};
}

Grid::Grid(const GridDescriptor& desc) : desc_(desc) {
    validate(desc_);
    const std::size_t n = desc_.n;
    const int dim = desc_.dim;
    const bool ball = desc_.shape == Shape::Radial && desc_.a == 0.0;

    if (ball) {
        // Origin is an unknown; node i sits at r = i h, the Dirichlet node at b.
        h_ = desc_.b / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) radii_.push_back(static_cast<double>(i) * h_);
    } else {
        h_ = (desc_.b - desc_.a) / static_cast<double>(n + 1);
        for (std::size_t i = 0; i < n; ++i)
            radii_.push_back(desc_.a + static_cast<double>(i + 1) * h_);
    }

    const double half = 0.5 * h_;
    auto radial_face = [&](double r) { return std::pow(r, dim - 1) / h_; };

    if (desc_.shape != Shape::Polar2d) {
        for (std::size_t i = 0; i < n; ++i) {
            const double lo = (ball && i == 0) ? 0.0 : radii_[i] - half;
            weights_.push_back(desc_.shape == Shape::Interval ? h_
                                                              : cell_measure(lo, radii_[i] + half, dim));
        }
        if (desc_.shape == Shape::Interval) {
            boundary_weight_ = h_;
        } else {
            boundary_weight_ = cell_measure(desc_.b - half, desc_.b, dim);
            if (!ball) boundary_weight_ += cell_measure(desc_.a, desc_.a + half, dim);
        }
        const auto ni = static_cast<std::ptrdiff_t>(n);
        if (!ball) edges_.push_back({0, -1, radial_face(desc_.a + half)});
        for (std::ptrdiff_t i = 0; i + 1 < ni; ++i)
            edges_.push_back({i, i + 1, radial_face(radii_[i] + half)});
        edges_.push_back({ni - 1, -1, radial_face(desc_.b - half)});
    } else {
        const std::size_t nt = desc_.n_theta;
        h_theta_ = 2.0 * std::numbers::pi / static_cast<double>(nt);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < nt; ++j) weights_.push_back(radii_[i] * h_ * h_theta_);
        boundary_weight_ = 2.0 * std::numbers::pi *
                           (cell_measure(desc_.a, desc_.a + half, 2) +
                            cell_measure(desc_.b - half, desc_.b, 2));
        auto id = [&](std::size_t i, std::size_t j) { return static_cast<std::ptrdiff_t>(index(i, j)); };
        for (std::size_t j = 0; j < nt; ++j) {
            edges_.push_back({id(0, j), -1, (desc_.a + half) * h_theta_ / h_});
            edges_.push_back({id(n - 1, j), -1, (desc_.b - half) * h_theta_ / h_});
        }
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < nt; ++j) {
                if (i + 1 < n) edges_.push_back({id(i, j), id(i + 1, j), (radii_[i] + half) * h_theta_ / h_});
                edges_.push_back({id(i, j), id(i, (j + 1) % nt), h_ / (radii_[i] * h_theta_)});
            }
        }
    }

    const auto size = static_cast<Eigen::Index>(weights_.size());
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(edges_.size() * 4);
    for (const auto& e : edges_) {
        triplets.emplace_back(e.i, e.i, e.weight);
        if (e.j >= 0) {
            triplets.emplace_back(e.j, e.j, e.weight);
            triplets.emplace_back(e.i, e.j, -e.weight);
            triplets.emplace_back(e.j, e.i, -e.weight);
        }
    }
    stiffness_.resize(size, size);
    stiffness_.setFromTriplets(triplets.begin(), triplets.end());
    stiffness_.makeCompressed();

    factor_ = std::make_shared<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>(stiffness_);
    if (factor_->info() != Eigen::Success)
        throw Error(ErrorCode::SolverFailure, "stiffness factorization failed");
}

std::shared_ptr<const Grid> Grid::build(const GridDescriptor& desc) {
    return std::shared_ptr<const Grid>(new Grid(desc));
}

GridPtr build_grid(const GridDescriptor& desc) { return Grid::build(desc); }

double Grid::theta_of(std::size_t k) const noexcept {
    if (desc_.shape != Shape::Polar2d) return 0.0;
    return static_cast<double>(k % desc_.n_theta) * h_theta_;
}

double Grid::measure() const noexcept {
    return std::accumulate(weights_.begin(), weights_.end(), 0.0) + boundary_weight_;
}

Eigen::VectorXd Grid::solve_stiffness(const Eigen::VectorXd& rhs) const {
    Eigen::VectorXd x = factor_->solve(rhs);
    if (factor_->info() != Eigen::Success || !x.allFinite())
        throw Error(ErrorCode::SolverFailure, "Poisson solve failed");
    return x;
}

Field::Field(GridPtr grid) : grid_(std::move(grid)), values_(grid_->size(), 0.0) {}

Field::Field(GridPtr grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
    if (values_.size() != grid_->size())
        throw Error(ErrorCode::ShapeMismatch, "value count does not match interior node count");
}

bool Field::is_finite() const noexcept {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

bool Field::is_zero() const noexcept {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return v == 0.0; });
}

double Field::min() const noexcept { return *std::min_element(values_.begin(), values_.end()); }
double Field::max() const noexcept { return *std::max_element(values_.begin(), values_.end()); }

Field& Field::operator+=(const Field& other) {
    require_same_grid(*this, other);
    for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += other.values_[k];
    return *this;
}

Field& Field::operator-=(const Field& other) {
    require_same_grid(*this, other);
    for (std::size_t k = 0; k < values_.size(); ++k) values_[k] -= other.values_[k];
    return *this;
}

Field& Field::operator*=(double c) noexcept {
    for (auto& v : values_) v *= c;
    return *this;
}

void require_same_grid(const Field& lhs, const Field& rhs) {
    if (!lhs.grid() || !rhs.grid())
        throw Error(ErrorCode::GridMismatch, "field without grid");
    if (lhs.grid() != rhs.grid() && !(lhs.grid()->descriptor() == rhs.grid()->descriptor()))
        throw Error(ErrorCode::GridMismatch, "fields live on different grids");
}

LaplaceOperator::LaplaceOperator(GridPtr grid) : grid_(std::move(grid)) {}

Field LaplaceOperator::apply(const Field& w) const {
    if (!w.grid() || !(w.grid()->descriptor() == grid_->descriptor()))
        throw Error(ErrorCode::GridMismatch, "field is not on the operator's grid");
    Field out(grid_);
    out.vec() = -(grid_->stiffness() * w.vec());
    const auto wts = grid_->weights();
    for (std::size_t k = 0; k < out.size(); ++k) out[k] /= wts[k];
    return out;
}

Field LaplaceOperator::solve_poisson(const Field& f) const {
    if (!f.grid() || !(f.grid()->descriptor() == grid_->descriptor()))
        throw Error(ErrorCode::GridMismatch, "field is not on the operator's grid");
    Eigen::VectorXd rhs = f.vec();
    const auto wts = grid_->weights();
    for (Eigen::Index k = 0; k < rhs.size(); ++k) rhs[k] *= wts[static_cast<std::size_t>(k)];
    Field out(grid_);
    out.vec() = grid_->solve_stiffness(rhs);
    return out;
}

double LaplaceOperator::dirichlet_form(const Field& w) const {
    return w.vec().dot(grid_->stiffness() * w.vec());
}

Field apply_laplacian(const LaplaceOperator& op, const Field& w) { return op.apply(w); }
Field solve_poisson(const LaplaceOperator& op, const Field& f) { return op.solve_poisson(f); }

double inner(const Field& f, const Field& g) {
    require_same_grid(f, g);
    const auto wts = f.grid()->weights();
    double s = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k) s += wts[k] * f[k] * g[k];
    return s;
}

namespace {

struct TridiagonalModes {
    Eigen::VectorXd values;
    Eigen::MatrixXd vectors;  // columns are W-orthonormal radial vectors
};

// Generalized eigenpairs of a symmetric tridiagonal stiffness against a
// diagonal mass, via the symmetric scaling W^{-1/2} K W^{-1/2}.
TridiagonalModes tridiagonal_modes(const Eigen::VectorXd& diag, const Eigen::VectorXd& off,
                                   const Eigen::VectorXd& mass) {
    const Eigen::Index n = diag.size();
    Eigen::VectorXd d(n), e(std::max<Eigen::Index>(n - 1, 0));
    for (Eigen::Index i = 0; i < n; ++i) d[i] = diag[i] / mass[i];
    for (Eigen::Index i = 0; i + 1 < n; ++i) e[i] = off[i] / std::sqrt(mass[i] * mass[i + 1]);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
    solver.computeFromTridiagonal(d, e, Eigen::ComputeEigenvectors);
    if (solver.info() != Eigen::Success)
        throw Error(ErrorCode::SolverFailure, "tridiagonal eigensolver failed");
    TridiagonalModes out{solver.eigenvalues(), solver.eigenvectors()};
    for (Eigen::Index i = 0; i < n; ++i) out.vectors.row(i) /= std::sqrt(mass[i]);
    for (Eigen::Index c = 0; c < n; ++c) {
        Eigen::Index arg = 0;
        out.vectors.col(c).cwiseAbs().maxCoeff(&arg);
        if (out.vectors(arg, c) < 0) out.vectors.col(c) *= -1.0;
    }
    return out;
}

}  // namespace

std::vector<DirichletMode> dirichlet_modes(const GridPtr& grid, std::size_t count) {
    const std::size_t nr = grid->n_radial();
    std::vector<DirichletMode> modes;

    // Radial tridiagonal assembled from the per-angle radial edges.
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nr));
    Eigen::VectorXd off = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nr > 0 ? nr - 1 : 0));
    Eigen::VectorXd mass(static_cast<Eigen::Index>(nr));
    const bool polar = grid->shape() == Shape::Polar2d;
    for (const auto& e : grid->edges()) {
        const auto i = static_cast<Eigen::Index>(grid->radial_index(static_cast<std::size_t>(e.i)));
        if (polar) {
            if (e.i % static_cast<std::ptrdiff_t>(grid->n_theta()) != 0) continue;
            if (e.j >= 0 && grid->radial_index(static_cast<std::size_t>(e.j)) == static_cast<std::size_t>(i))
                continue;  // angular edge
        }
        diag[i] += e.weight;
        if (e.j >= 0) {
            const auto j = static_cast<Eigen::Index>(grid->radial_index(static_cast<std::size_t>(e.j)));
            diag[j] += e.weight;
            off[std::min(i, j)] = -e.weight;
        }
    }
    for (std::size_t i = 0; i < nr; ++i)
        mass[static_cast<Eigen::Index>(i)] = grid->weights()[polar ? grid->index(i, 0) : i];

    if (!polar) {
        const auto tm = tridiagonal_modes(diag, off, mass);
        for (std::size_t c = 0; c < std::min(count, nr); ++c) {
            Field f(grid);
            f.vec() = tm.vectors.col(static_cast<Eigen::Index>(c));
            modes.push_back({tm.values[static_cast<Eigen::Index>(c)], std::move(f)});
        }
        return modes;
    }

    const std::size_t nt = grid->n_theta();
    const double ht = grid->h_theta();
    const std::size_t kmax = std::min(nt / 2, count);
    for (std::size_t k = 0; k <= kmax; ++k) {
        Eigen::VectorXd dk = diag;
        const double angular = 2.0 - 2.0 * std::cos(static_cast<double>(k) * ht);
        for (std::size_t i = 0; i < nr; ++i)
            dk[static_cast<Eigen::Index>(i)] += grid->h() / (grid->radii()[i] * ht) * angular;
        const auto tm = tridiagonal_modes(dk, off, mass);
        const bool single = (k == 0 || 2 * k == nt);
        const double scale = single ? 1.0 / std::sqrt(static_cast<double>(nt))
                                    : std::sqrt(2.0 / static_cast<double>(nt));
        for (std::size_t c = 0; c < std::min(count, nr); ++c) {
            for (int part = 0; part < (single ? 1 : 2); ++part) {
                Field f(grid);
                for (std::size_t i = 0; i < nr; ++i) {
                    for (std::size_t j = 0; j < nt; ++j) {
                        const double arg = static_cast<double>(k * j) * ht;
                        const double ang = part == 0 ? std::cos(arg) : std::sin(arg);
                        f[grid->index(i, j)] =
                            scale * ang * tm.vectors(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
                    }
                }
                modes.push_back({tm.values[static_cast<Eigen::Index>(c)], std::move(f)});
            }
        }
    }
    std::stable_sort(modes.begin(), modes.end(),
                     [](const DirichletMode& x, const DirichletMode& y) { return x.eigenvalue < y.eigenvalue; });
    if (modes.size() > count) modes.resize(count);
    return modes;
}

Field first_eigenvector(const GridPtr& grid, double tol, int max_iter) {
    const double a = grid->a();
    const double b = grid->b();
    const bool ball = grid->shape() == Shape::Radial && a == 0.0;
    Field v = Field::from_function(grid, [&](double r, double) {
        return ball ? std::cos(0.5 * std::numbers::pi * r / b)
                    : std::sin(std::numbers::pi * (r - a) / (b - a));
    });
    LaplaceOperator op(grid);
    v *= 1.0 / std::sqrt(inner(v, v));
    for (int it = 0; it < max_iter; ++it) {
        Field next = op.solve_poisson(v);
        next *= 1.0 / std::sqrt(inner(next, next));
        Field diff = next - v;
        v = std::move(next);
        if (std::sqrt(inner(diff, diff)) < tol) return v;
    }
    throw Error(ErrorCode::NonConvergence, "power iteration did not converge");
}

ShiftedSolver::ShiftedSolver(GridPtr grid) : grid_(std::move(grid)), matrix_(grid_->stiffness()) {
    diag_slot_.assign(static_cast<std::size_t>(matrix_.rows()), -1);
    for (Eigen::Index col = 0; col < matrix_.outerSize(); ++col) {
        for (Eigen::Index p = matrix_.outerIndexPtr()[col]; p < matrix_.outerIndexPtr()[col + 1]; ++p)
            if (matrix_.innerIndexPtr()[p] == col) diag_slot_[static_cast<std::size_t>(col)] = p;
    }
    ldlt_.analyzePattern(matrix_);
}

Eigen::VectorXd ShiftedSolver::solve(double stiffness_scale, std::span<const double> mass_diag,
                                     const Eigen::VectorXd& rhs) {
    const auto& k = grid_->stiffness();
    const auto nnz = static_cast<std::size_t>(k.nonZeros());
    for (std::size_t p = 0; p < nnz; ++p) matrix_.valuePtr()[p] = stiffness_scale * k.valuePtr()[p];
    const auto wts = grid_->weights();
    for (std::size_t i = 0; i < diag_slot_.size(); ++i)
        matrix_.valuePtr()[diag_slot_[i]] += wts[i] * mass_diag[i];
    ldlt_.factorize(matrix_);
    if (ldlt_.info() != Eigen::Success)
        throw Error(ErrorCode::SolverFailure, "shifted factorization failed");
    Eigen::VectorXd x = ldlt_.solve(rhs);
    if (!x.allFinite()) throw Error(ErrorCode::SolverFailure, "shifted solve produced non-finite values");
    return x;
}

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidGeometry: return "invalid-geometry";
        case ErrorCode::ResolutionTooSmall: return "resolution-too-small";
        case ErrorCode::GridMismatch: return "grid-mismatch";
        case ErrorCode::SolverFailure: return "solver-failure";
        case ErrorCode::InvalidParams: return "invalid-params";
        case ErrorCode::ZeroField: return "zero-field";
        case ErrorCode::ShapeMismatch: return "shape-mismatch";
        case ErrorCode::NewtonDivergence: return "newton-divergence";
        case ErrorCode::ExtinctInput: return "extinct-input";
        case ErrorCode::MaxStepsExceeded: return "max-steps-exceeded";
        case ErrorCode::InsufficientDecayWindow: return "insufficient-decay-window";
        case ErrorCode::TimeBeyondExtinction: return "t-beyond-extinction";
        case ErrorCode::TrajectoryTooShort: return "trajectory-too-short";
        case ErrorCode::ShootingBracketFailure: return "shooting-bracket-failure";
        case ErrorCode::NonConvergence: return "nonconvergence";
        case ErrorCode::WrongGridShape: return "wrong-grid-shape";
        case ErrorCode::ProjectionFailure: return "projection-failure";
        case ErrorCode::InsufficientPoints: return "insufficient-points";
        case ErrorCode::BadMagic: return "bad-magic";
        case ErrorCode::TruncatedFile: return "truncated-file";
        case ErrorCode::DescriptorMismatch: return "grid-descriptor-mismatch";
        case ErrorCode::MalformedConfig: return "malformed-config";
        case ErrorCode::UnknownSubcommand: return "unknown-subcommand";
        case ErrorCode::IoFailure: return "io-failure";
    }
    return "unknown";
}

}  // namespace fdelab
