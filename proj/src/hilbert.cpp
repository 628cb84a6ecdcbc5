#include "nvcool/hilbert.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nvcool/errors.hpp"

namespace nvcool::hilbert {

// ----- SparseOperator -----

SparseOperator::SparseOperator(Index dim) : mat_(dim, dim) {
    if (dim < 1) throw std::invalid_argument("SparseOperator: dim must be >= 1");
    mat_.makeCompressed();
}

SparseOperator::SparseOperator(Index dim, const std::vector<Triplet>& entries) : mat_(dim, dim) {
    if (dim < 1) throw std::invalid_argument("SparseOperator: dim must be >= 1");
    for (const auto& t : entries) {
        if (t.row() < 0 || t.row() >= dim || t.col() < 0 || t.col() >= dim)
            throw std::invalid_argument("SparseOperator: triplet index out of range");
    }
    mat_.setFromTriplets(entries.begin(), entries.end());  // merges duplicates
    mat_.prune([](Index, Index, const Complex& v) { return v != Complex(0.0, 0.0); });
    mat_.makeCompressed();
}

SparseOperator::SparseOperator(const Eigen::SparseMatrix<Complex>& m) : mat_(m) {
    if (m.rows() != m.cols()) throw std::invalid_argument("SparseOperator: matrix must be square");
    mat_.prune([](Index, Index, const Complex& v) { return v != Complex(0.0, 0.0); });
    mat_.makeCompressed();
}

SparseOperator SparseOperator::from_dense(const ComplexMatrix& m, double prune_tol) {
    if (m.rows() != m.cols()) throw std::invalid_argument("SparseOperator: matrix must be square");
    std::vector<Triplet> trips;
    for (Index j = 0; j < m.cols(); ++j)
        for (Index i = 0; i < m.rows(); ++i)
            if (std::abs(m(i, j)) > prune_tol) trips.emplace_back(i, j, m(i, j));
    return SparseOperator(m.rows(), trips);
}

SparseOperator SparseOperator::adjoint() const {
    return SparseOperator(Eigen::SparseMatrix<Complex>(mat_.adjoint()));
}

SparseOperator SparseOperator::operator+(const SparseOperator& other) const {
    if (dim() != other.dim()) throw std::invalid_argument("SparseOperator: dimension mismatch in +");
    return SparseOperator(Eigen::SparseMatrix<Complex>(mat_ + other.mat_));
}

SparseOperator SparseOperator::operator-(const SparseOperator& other) const {
    if (dim() != other.dim()) throw std::invalid_argument("SparseOperator: dimension mismatch in -");
    return SparseOperator(Eigen::SparseMatrix<Complex>(mat_ - other.mat_));
}

SparseOperator SparseOperator::operator*(const SparseOperator& other) const {
    if (dim() != other.dim()) throw std::invalid_argument("SparseOperator: dimension mismatch in *");
    return SparseOperator(Eigen::SparseMatrix<Complex>(mat_ * other.mat_));
}

SparseOperator SparseOperator::scaled(Complex factor) const {
    return SparseOperator(Eigen::SparseMatrix<Complex>(factor * mat_));
}

bool SparseOperator::is_hermitian(double tol) const {
    Eigen::SparseMatrix<Complex> diff = mat_ - Eigen::SparseMatrix<Complex>(mat_.adjoint());
    for (Index k = 0; k < diff.outerSize(); ++k)
        for (Eigen::SparseMatrix<Complex>::InnerIterator it(diff, k); it; ++it)
            if (std::abs(it.value()) > tol) return false;
    return true;
}

bool SparseOperator::is_monomial() const {
    std::vector<int> row_hits(static_cast<std::size_t>(dim()), 0);
    for (Index k = 0; k < mat_.outerSize(); ++k) {
        int col_hits = 0;
        for (Eigen::SparseMatrix<Complex>::InnerIterator it(mat_, k); it; ++it) {
            if (++col_hits > 1) return false;
            if (++row_hits[static_cast<std::size_t>(it.row())] > 1) return false;
        }
    }
    return true;
}

// ----- SpaceLayout -----

const char* subsystem_name(Subsystem s) {
    switch (s) {
        case Subsystem::Spin: return "spin";
        case Subsystem::ModeA: return "mode_a";
        case Subsystem::ModeB: return "mode_b";
    }
    return "?";
}

SpaceLayout::SpaceLayout(std::vector<Slot> slots) : slots_(std::move(slots)) {
    if (slots_.empty()) throw std::invalid_argument("SpaceLayout: no slots");
    for (std::size_t i = 0; i < slots_.size(); ++i) {
        const auto& s = slots_[i];
        if (s.label == Subsystem::Spin && s.dim != 2)
            throw std::invalid_argument("SpaceLayout: spin slot must have dim 2");
        if (s.dim < 2) throw std::invalid_argument("SpaceLayout: slot dims must be >= 2");
        if (i > 0 && static_cast<int>(slots_[i - 1].label) >= static_cast<int>(s.label))
            throw std::invalid_argument("SpaceLayout: slots must follow spin, mode_a, mode_b order");
    }
}

SpaceLayout SpaceLayout::spin_a_b(Index dim_a, Index dim_b) {
    return SpaceLayout({{Subsystem::Spin, 2}, {Subsystem::ModeA, dim_a}, {Subsystem::ModeB, dim_b}});
}

SpaceLayout SpaceLayout::spin_b(Index dim_b) {
    return SpaceLayout({{Subsystem::Spin, 2}, {Subsystem::ModeB, dim_b}});
}

SpaceLayout SpaceLayout::single(Subsystem label, Index dim) {
    return SpaceLayout({{label, dim}});
}

Index SpaceLayout::total_dim() const {
    Index d = 1;
    for (const auto& s : slots_) d *= s.dim;
    return d;
}

bool SpaceLayout::has(Subsystem label) const {
    for (const auto& s : slots_)
        if (s.label == label) return true;
    return false;
}

Index SpaceLayout::slot_index(Subsystem label) const {
    for (std::size_t i = 0; i < slots_.size(); ++i)
        if (slots_[i].label == label) return static_cast<Index>(i);
    throw std::invalid_argument(std::string("SpaceLayout: no slot ") + subsystem_name(label));
}

Index SpaceLayout::dim_of(Subsystem label) const {
    return slots_[static_cast<std::size_t>(slot_index(label))].dim;
}

std::vector<Index> SpaceLayout::unravel(Index flat) const {
    if (flat < 0 || flat >= total_dim()) throw std::invalid_argument("SpaceLayout: flat index out of range");
    std::vector<Index> multi(slots_.size());
    for (std::size_t i = slots_.size(); i-- > 0;) {
        multi[i] = flat % slots_[i].dim;
        flat /= slots_[i].dim;
    }
    return multi;
}

Index SpaceLayout::ravel(const std::vector<Index>& multi) const {
    if (multi.size() != slots_.size()) throw std::invalid_argument("SpaceLayout: wrong multi-index length");
    Index flat = 0;
    for (std::size_t i = 0; i < slots_.size(); ++i) {
        if (multi[i] < 0 || multi[i] >= slots_[i].dim)
            throw std::invalid_argument("SpaceLayout: multi-index out of range");
        flat = flat * slots_[i].dim + multi[i];
    }
    return flat;
}

bool SpaceLayout::operator==(const SpaceLayout& other) const {
    if (slots_.size() != other.slots_.size()) return false;
    for (std::size_t i = 0; i < slots_.size(); ++i)
        if (slots_[i].label != other.slots_[i].label || slots_[i].dim != other.slots_[i].dim) return false;
    return true;
}

// ----- DensityMatrix -----

DensityMatrix::DensityMatrix(SpaceLayout layout, ComplexMatrix mat)
    : layout_(std::move(layout)), mat_(std::move(mat)) {
    if (mat_.rows() != mat_.cols()) throw std::invalid_argument("DensityMatrix: matrix must be square");
    if (mat_.rows() != layout_.total_dim())
        throw std::invalid_argument("DensityMatrix: matrix dim does not match layout");
    if (hermiticity_error() > 1e-10) throw NumericError("DensityMatrix: not Hermitian within 1e-10");
    if (trace_error() > 1e-8) throw NumericError("DensityMatrix: trace deviates from 1 beyond 1e-8");
}

double DensityMatrix::trace_error() const { return nvcool::hilbert::trace_error(mat_); }

double DensityMatrix::hermiticity_error() const { return nvcool::hilbert::hermiticity_error(mat_); }

double DensityMatrix::min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(mat_, Eigen::EigenvaluesOnly);
    return solver.eigenvalues().minCoeff();
}

// ----- elementary operators -----

SparseOperator annihilation(Index dim) {
    if (dim < 2) throw std::invalid_argument("annihilation: dim must be >= 2");
    std::vector<SparseOperator::Triplet> trips;
    trips.reserve(static_cast<std::size_t>(dim - 1));
    // a |n> = sqrt(n) |n-1>  ->  a_{n-1, n} = sqrt(n)
    for (Index n = 1; n < dim; ++n) trips.emplace_back(n - 1, n, Complex(std::sqrt(double(n)), 0.0));
    return SparseOperator(dim, trips);
}

SparseOperator creation(Index dim) { return annihilation(dim).adjoint(); }

SparseOperator number_op(Index dim) {
    if (dim < 2) throw std::invalid_argument("number_op: dim must be >= 2");
    std::vector<SparseOperator::Triplet> trips;
    for (Index n = 1; n < dim; ++n) trips.emplace_back(n, n, Complex(double(n), 0.0));
    return SparseOperator(dim, trips);
}

SparseOperator identity_op(Index dim) {
    if (dim < 1) throw std::invalid_argument("identity_op: dim must be >= 1");
    std::vector<SparseOperator::Triplet> trips;
    for (Index n = 0; n < dim; ++n) trips.emplace_back(n, n, Complex(1.0, 0.0));
    return SparseOperator(dim, trips);
}

SparseOperator sigma_minus() { return SparseOperator(2, {{0, 1, Complex(1.0, 0.0)}}); }

SparseOperator sigma_plus() { return SparseOperator(2, {{1, 0, Complex(1.0, 0.0)}}); }

SparseOperator sigma_x() {
    return SparseOperator(2, {{0, 1, Complex(1.0, 0.0)}, {1, 0, Complex(1.0, 0.0)}});
}

SparseOperator sigma_z() {
    return SparseOperator(2, {{0, 0, Complex(-1.0, 0.0)}, {1, 1, Complex(1.0, 0.0)}});
}

// ----- operations -----

ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
    ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Index i = 0; i < a.rows(); ++i)
        for (Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

SparseOperator embed(const SparseOperator& op, Subsystem slot, const SpaceLayout& layout) {
    const Index s = layout.slot_index(slot);
    if (op.dim() != layout.slots()[static_cast<std::size_t>(s)].dim)
        throw std::invalid_argument("embed: operator dim does not match slot dim");

    // flat = (outer_index * slot_dim + slot_index) * inner + inner_index, so an
    // embedded entry couples flat indices differing only in the slot factor.
    Index inner = 1, outer_count = 1;
    for (std::size_t i = 0; i < layout.slots().size(); ++i) {
        if (static_cast<Index>(i) > s) inner *= layout.slots()[i].dim;
        if (static_cast<Index>(i) < s) outer_count *= layout.slots()[i].dim;
    }

    std::vector<SparseOperator::Triplet> trips;
    trips.reserve(static_cast<std::size_t>(op.nonzeros() * outer_count * inner));
    const auto& m = op.matrix();
    const Index slot_dim = op.dim();
    for (Index k = 0; k < m.outerSize(); ++k) {
        for (Eigen::SparseMatrix<Complex>::InnerIterator it(m, k); it; ++it) {
            for (Index o = 0; o < outer_count; ++o) {
                for (Index in = 0; in < inner; ++in) {
                    const Index row = (o * slot_dim + it.row()) * inner + in;
                    const Index col = (o * slot_dim + it.col()) * inner + in;
                    trips.emplace_back(row, col, it.value());
                }
            }
        }
    }
    return SparseOperator(layout.total_dim(), trips);
}

ComplexMatrix thermal_state(Index dim, double nbar) {
    if (dim < 1) throw std::invalid_argument("thermal_state: dim must be >= 1");
    if (nbar < 0.0) throw std::invalid_argument("thermal_state: nbar must be >= 0");
    ComplexMatrix rho = ComplexMatrix::Zero(dim, dim);
    if (nbar == 0.0) {
        rho(0, 0) = 1.0;
        return rho;
    }
    const double r = nbar / (1.0 + nbar);
    double w = 1.0, norm = 0.0;
    for (Index n = 0; n < dim; ++n, w *= r) {
        rho(n, n) = w;
        norm += w;
    }
    rho /= norm;
    return rho;
}

double expectation(const ComplexMatrix& rho, const SparseOperator& op) {
    if (rho.rows() != op.dim()) throw std::invalid_argument("expectation: dimension mismatch");
    // tr(op * rho) = sum_{ij} op_ij rho_ji
    Complex tr(0.0, 0.0);
    const auto& m = op.matrix();
    for (Index k = 0; k < m.outerSize(); ++k)
        for (Eigen::SparseMatrix<Complex>::InnerIterator it(m, k); it; ++it)
            tr += it.value() * rho(it.col(), it.row());
    if (std::abs(tr.imag()) > 1e-8)
        throw NumericError("expectation: imaginary part " + std::to_string(tr.imag()) +
                           " exceeds 1e-8 (observable not Hermitian or state corrupted)");
    return tr.real();
}

double expectation(const DensityMatrix& rho, const SparseOperator& op) {
    return expectation(rho.matrix(), op);
}

ComplexMatrix partial_trace(const DensityMatrix& rho, const std::set<Subsystem>& keep) {
    const auto& layout = rho.layout();
    if (keep.empty()) throw std::invalid_argument("partial_trace: keep set must be nonempty");
    for (auto s : keep)
        if (!layout.has(s))
            throw std::invalid_argument(std::string("partial_trace: layout has no slot ") + subsystem_name(s));

    const auto& slots = layout.slots();
    const std::size_t n = slots.size();
    std::vector<bool> kept(n, false);
    Index keep_dim = 1, trace_dim = 1;
    for (std::size_t i = 0; i < n; ++i) {
        kept[i] = keep.count(slots[i].label) > 0;
        (kept[i] ? keep_dim : trace_dim) *= slots[i].dim;
    }

    ComplexMatrix out = ComplexMatrix::Zero(keep_dim, keep_dim);
    std::vector<Index> row(n), col(n);
    // out[I, J] = sum_T rho[(I,T), (J,T)] with T running over traced slots.
    for (Index i = 0; i < keep_dim; ++i) {
        for (Index j = 0; j < keep_dim; ++j) {
            Complex acc(0.0, 0.0);
            for (Index t = 0; t < trace_dim; ++t) {
                Index ii = i, jj = j, tt = t;
                for (std::size_t s = n; s-- > 0;) {
                    const Index d = slots[s].dim;
                    if (kept[s]) {
                        row[s] = ii % d;
                        col[s] = jj % d;
                        ii /= d;
                        jj /= d;
                    } else {
                        row[s] = col[s] = tt % d;
                        tt /= d;
                    }
                }
                acc += rho.matrix()(layout.ravel(row), layout.ravel(col));
            }
            out(i, j) = acc;
        }
    }
    return out;
}

double trace_error(const ComplexMatrix& rho) { return std::abs(rho.trace() - Complex(1.0, 0.0)); }

double hermiticity_error(const ComplexMatrix& rho) {
    double dev = 0.0;
    for (Index j = 0; j < rho.cols(); ++j)
        for (Index i = 0; i <= j; ++i) dev = std::max(dev, std::abs(rho(i, j) - std::conj(rho(j, i))));
    return dev;
}

double hermitize_in_place(ComplexMatrix& m) {
    double dev = 0.0;
    for (Index j = 0; j < m.cols(); ++j) {
        for (Index i = 0; i < j; ++i) {
            const Complex up = m(i, j), lo = m(j, i);
            dev = std::max(dev, std::abs(up - std::conj(lo)));
            const Complex avg = 0.5 * (up + std::conj(lo));
            m(i, j) = avg;
            m(j, i) = std::conj(avg);
        }
        dev = std::max(dev, std::abs(m(j, j).imag()) * 2.0);
        m(j, j) = Complex(m(j, j).real(), 0.0);
    }
    return dev;
}

}  // namespace nvcool::hilbert
