#pragma once

#include <complex>
#include <initializer_list>
#include <set>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

// Operator algebra on a truncated spin (x) mode-a (x) mode-b Hilbert space.
// Basis ordering is fixed: the spin index varies slowest, the mode-b index
// fastest, i.e. flat index = (s * dim_a + n_a) * dim_b + n_b.
//
// Spin convention: index 0 is the ground state |0>, index 1 the excited
// state |-1>; sigma_minus maps 1 -> 0 and sigma_z = diag(-1, +1).

namespace nvcool::hilbert {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using Index = Eigen::Index;

// ----- SparseOperator -----

// Square sparse operator in triplet/CSC form.  Construction sorts and merges
// duplicate (row, col) entries, so a stored operator has unique coordinates
// and materializing to dense and back is lossless.
class SparseOperator {
  public:
    using Triplet = Eigen::Triplet<Complex>;

    SparseOperator() = default;
    explicit SparseOperator(Index dim);  // zero operator
    SparseOperator(Index dim, const std::vector<Triplet>& entries);
    explicit SparseOperator(const Eigen::SparseMatrix<Complex>& m);

    Index dim() const { return mat_.rows(); }
    Index nonzeros() const { return mat_.nonZeros(); }
    const Eigen::SparseMatrix<Complex>& matrix() const { return mat_; }

    ComplexMatrix dense() const { return ComplexMatrix(mat_); }
    static SparseOperator from_dense(const ComplexMatrix& m, double prune_tol = 0.0);

    SparseOperator adjoint() const;
    SparseOperator operator+(const SparseOperator& other) const;
    SparseOperator operator-(const SparseOperator& other) const;
    SparseOperator operator*(const SparseOperator& other) const;
    SparseOperator scaled(Complex factor) const;

    bool is_hermitian(double tol = 1e-12) const;

    // At most one nonzero per row and per column (every ladder, spin and
    // jump operator used here is of this shape; enables fast sandwiches).
    bool is_monomial() const;

  private:
    Eigen::SparseMatrix<Complex> mat_;
};

inline SparseOperator operator*(Complex factor, const SparseOperator& op) {
    return op.scaled(factor);
}
inline SparseOperator operator*(double factor, const SparseOperator& op) {
    return op.scaled(Complex(factor, 0.0));
}

// ----- SpaceLayout -----

enum class Subsystem { Spin = 0, ModeA = 1, ModeB = 2 };

const char* subsystem_name(Subsystem s);

// Ordered subsystem dimensions of a tensor-product space.  Slots must appear
// in the canonical order spin, mode a, mode b; the spin slot always has
// dimension 2 and mode slots at least 2.
class SpaceLayout {
  public:
    struct Slot {
        Subsystem label;
        Index dim;
    };

    static SpaceLayout spin_a_b(Index dim_a, Index dim_b);
    static SpaceLayout spin_b(Index dim_b);
    static SpaceLayout single(Subsystem label, Index dim);

    Index total_dim() const;
    Index num_slots() const { return static_cast<Index>(slots_.size()); }
    const std::vector<Slot>& slots() const { return slots_; }
    bool has(Subsystem label) const;
    Index dim_of(Subsystem label) const;
    Index slot_index(Subsystem label) const;

    // Occupation numbers (slot-wise indices) of a flat basis index and back.
    std::vector<Index> unravel(Index flat) const;
    Index ravel(const std::vector<Index>& multi) const;

    bool operator==(const SpaceLayout& other) const;

  private:
    explicit SpaceLayout(std::vector<Slot> slots);
    std::vector<Slot> slots_;
};

// ----- DensityMatrix -----

// Dense density matrix tied to a layout.  Construction checks Hermiticity
// (tolerance 1e-10) and unit trace (tolerance 1e-8); positivity is not
// checked eagerly (an eigendecomposition) but available on demand.
class DensityMatrix {
  public:
    DensityMatrix(SpaceLayout layout, ComplexMatrix mat);

    const SpaceLayout& layout() const { return layout_; }
    const ComplexMatrix& matrix() const { return mat_; }
    Index dim() const { return mat_.rows(); }

    double trace_error() const;        // |tr(rho) - 1|
    double hermiticity_error() const;  // max |rho - rho^dag|
    double min_eigenvalue() const;

  private:
    SpaceLayout layout_;
    ComplexMatrix mat_;
};

// ----- elementary operators -----

// Truncated annihilation operator: a|n> = sqrt(n)|n-1>.
SparseOperator annihilation(Index dim);
SparseOperator creation(Index dim);    // adjoint of annihilation
SparseOperator number_op(Index dim);   // a^dag a = diag(0..dim-1)
SparseOperator identity_op(Index dim);

SparseOperator sigma_minus();  // |0><-1|, entry at (0, 1)
SparseOperator sigma_plus();   // |-1><0|, entry at (1, 0)
SparseOperator sigma_x();
SparseOperator sigma_z();      // diag(-1, +1)

// ----- operations -----

// Kronecker product, row-major convention: (A kron B)[i*p+k, j*q+l] = A[i,j]B[k,l].
ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b);

// Lift a single-subsystem operator to the full space (identity elsewhere).
SparseOperator embed(const SparseOperator& op, Subsystem slot, const SpaceLayout& layout);

// Truncated, renormalized thermal state diag(p_0..p_{dim-1}), p_n ~ r^n with
// r = nbar / (1 + nbar); nbar = 0 gives the ground-state projector.
ComplexMatrix thermal_state(Index dim, double nbar);

// Re tr(op * rho) for a Hermitian observable; throws NumericError if the
// imaginary part of the trace exceeds 1e-8.
double expectation(const DensityMatrix& rho, const SparseOperator& op);
double expectation(const ComplexMatrix& rho, const SparseOperator& op);

// Partial trace keeping the listed subsystems (result ordered canonically).
ComplexMatrix partial_trace(const DensityMatrix& rho, const std::set<Subsystem>& keep);

double trace_error(const ComplexMatrix& rho);
double hermiticity_error(const ComplexMatrix& rho);

// Average with the adjoint: exact Hermitian projection, returns max deviation.
double hermitize_in_place(ComplexMatrix& m);

}  // namespace nvcool::hilbert
