#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nvcool/hilbert.hpp"
#include "nvcool/model.hpp"

// Lindblad right-hand side, fixed-step RK4 propagation, stationarity
// detection, and the adjoint (Heisenberg-picture) Liouvillian.
//
// The master equation is
//   drho/dt = -i[H, rho] + sum_k w_k D_{x_k}(rho),
//   D_x(rho) = 2 x rho x^dag - x^dag x rho - rho x^dag x,
// note the factor 2 in front of the sandwich term.

namespace nvcool::liouville {

using hilbert::Complex;
using hilbert::ComplexMatrix;
using hilbert::DensityMatrix;
using hilbert::Index;
using hilbert::SparseOperator;
using model::LindbladTerm;

// ----- types -----

struct IntegratorSpec {
    double dt = 2e-4;       // renormalized units: 0.01 / 50
    double t_final = 3.0;
    int record_stride = 50;

    void validate() const;  // dt > 0, t_final >= dt, record_stride >= 1
    long total_steps() const;
};

// Which observable declares stationarity, over what trailing span.
struct StationaritySpec {
    std::string observable;  // empty: first observable in the map
    double window = 0.0;     // <= 0: 10% of t_final
    double tol = 1e-3;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<std::string> names;               // observable keys, fixed order
    std::vector<std::vector<double>> records;     // records[i][k]: time i, observable k
    std::vector<double> trace_dev;                // |tr rho - 1| per record
    std::vector<double> herm_dev;                 // pre-resymmetrization max |rho - rho^dag|
    std::optional<double> stationary_at;

    Index name_index(const std::string& name) const;  // throws on unknown name
    double value(std::size_t record, const std::string& name) const;
    double final_value(const std::string& name) const;
};

// ----- Lindblad algebra -----

ComplexMatrix dissipator(const SparseOperator& x, const ComplexMatrix& rho);

ComplexMatrix lindblad_rhs(const ComplexMatrix& rho, const SparseOperator& h,
                           const std::vector<LindbladTerm>& terms);
ComplexMatrix lindblad_rhs(const DensityMatrix& rho, const SparseOperator& h,
                           const std::vector<LindbladTerm>& terms);

// Heisenberg picture: D+_x(O) = 2 x^dag O x - x^dag x O - O x^dag x.
ComplexMatrix adjoint_dissipator(const SparseOperator& x, const SparseOperator& op);

// L+(O) = +i[H, O] + sum_k w_k D+_{x_k}(O); dual to lindblad_rhs under
// tr(O L(rho)) = tr(L+(O) rho).
ComplexMatrix adjoint_lindblad_rhs(const SparseOperator& op, const SparseOperator& h,
                                   const std::vector<LindbladTerm>& terms);

// ----- propagation -----

struct StepDiagnostics {
    double herm_dev = 0.0;   // deviation removed by re-symmetrization
    double trace_dev = 0.0;  // |tr - 1| after the step
};

// One classical RK4 step of drho/dt = rhs(rho); output re-symmetrized
// (average with adjoint, deviation logged) and trace-checked (throws
// NumericError beyond 1e-6).
using RhsFn = std::function<ComplexMatrix(const ComplexMatrix&)>;
DensityMatrix rk4_step(const DensityMatrix& rho, double dt, const RhsFn& rhs,
                       StepDiagnostics* diag = nullptr);

// How evolve() applies the Liouvillian.  Auto picks the graded block
// propagation when the operators decompose over a basis partition and rho0
// is supported on its diagonal blocks (exact, just faster); Dense forces the
// straightforward full-matrix path.
enum class EnginePath { Auto, Dense, Blocked };

Trajectory evolve(const DensityMatrix& rho0, const SparseOperator& h,
                  const std::vector<LindbladTerm>& terms, const IntegratorSpec& spec,
                  const std::map<std::string, SparseOperator>& observables,
                  const StationaritySpec& stationarity = {},
                  DensityMatrix* final_state = nullptr, EnginePath path = EnginePath::Auto);

bool steady_state_reached(const Trajectory& traj, const std::string& observable, double window,
                          double tol);

}  // namespace nvcool::liouville
