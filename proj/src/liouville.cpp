#include "nvcool/liouville.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "nvcool/errors.hpp"

namespace nvcool::liouville {

namespace {

using SparseCx = Eigen::SparseMatrix<Complex>;

std::string time_tag(double t) {
    std::ostringstream os;
    os << "t = " << t;
    return os.str();
}

}  // namespace

// ----- IntegratorSpec / Trajectory -----

void IntegratorSpec::validate() const {
    if (!(dt > 0)) throw ConfigError("IntegratorSpec: dt must be > 0");
    if (!(t_final >= dt)) throw ConfigError("IntegratorSpec: t_final must be >= dt");
    if (record_stride < 1) throw ConfigError("IntegratorSpec: record_stride must be >= 1");
    const double steps = t_final / dt;
    if (std::abs(steps - std::round(steps)) > 1e-6 * std::max(1.0, steps))
        throw ConfigError("IntegratorSpec: t_final must be an integer multiple of dt");
}

long IntegratorSpec::total_steps() const { return std::lround(t_final / dt); }

Index Trajectory::name_index(const std::string& name) const {
    for (std::size_t k = 0; k < names.size(); ++k)
        if (names[k] == name) return static_cast<Index>(k);
    throw std::invalid_argument("Trajectory: unknown observable '" + name + "'");
}

double Trajectory::value(std::size_t record, const std::string& name) const {
    return records.at(record)[static_cast<std::size_t>(name_index(name))];
}

double Trajectory::final_value(const std::string& name) const {
    if (records.empty()) throw std::invalid_argument("Trajectory: no records");
    return records.back()[static_cast<std::size_t>(name_index(name))];
}

// ----- Lindblad algebra (literal forms; used directly on small systems and
// as the oracle-facing public surface) -----

ComplexMatrix dissipator(const SparseOperator& x, const ComplexMatrix& rho) {
    if (x.dim() != rho.rows() || rho.rows() != rho.cols())
        throw std::invalid_argument("dissipator: dimension mismatch");
    const SparseCx& xm = x.matrix();
    const SparseCx xadj = SparseCx(xm.adjoint());
    const SparseCx xtx = SparseCx(xadj * xm);
    ComplexMatrix xr = xm * rho;
    return 2.0 * (xr * xadj) - xtx * rho - rho * xtx;
}

ComplexMatrix lindblad_rhs(const ComplexMatrix& rho, const SparseOperator& h,
                           const std::vector<LindbladTerm>& terms) {
    if (h.dim() != rho.rows() || rho.rows() != rho.cols())
        throw std::invalid_argument("lindblad_rhs: dimension mismatch");
    const Complex mi(0.0, -1.0);
    ComplexMatrix out = mi * (h.matrix() * rho - rho * h.matrix());
    for (const auto& term : terms) {
        if (term.weight == 0.0) continue;
        out += term.weight * dissipator(term.op, rho);
    }
    return out;
}

ComplexMatrix lindblad_rhs(const DensityMatrix& rho, const SparseOperator& h,
                           const std::vector<LindbladTerm>& terms) {
    return lindblad_rhs(rho.matrix(), h, terms);
}

ComplexMatrix adjoint_dissipator(const SparseOperator& x, const SparseOperator& op) {
    if (x.dim() != op.dim()) throw std::invalid_argument("adjoint_dissipator: dimension mismatch");
    const SparseOperator xadj = x.adjoint();
    const SparseOperator xtx = xadj * x;
    return (2.0 * ((xadj * op) * x) - xtx * op - op * xtx).dense();
}

ComplexMatrix adjoint_lindblad_rhs(const SparseOperator& op, const SparseOperator& h,
                                   const std::vector<LindbladTerm>& terms) {
    if (h.dim() != op.dim()) throw std::invalid_argument("adjoint_lindblad_rhs: dimension mismatch");
    const Complex i(0.0, 1.0);
    ComplexMatrix out = i * (h * op - op * h).dense();
    for (const auto& term : terms) {
        if (term.weight == 0.0) continue;
        out += term.weight * adjoint_dissipator(term.op, op);
    }
    return out;
}

// ----- generic RK4 step -----

DensityMatrix rk4_step(const DensityMatrix& rho, double dt, const RhsFn& rhs, StepDiagnostics* diag) {
    if (!(dt > 0)) throw std::invalid_argument("rk4_step: dt must be > 0");
    const ComplexMatrix& y = rho.matrix();
    const ComplexMatrix k1 = rhs(y);
    const ComplexMatrix k2 = rhs(y + (0.5 * dt) * k1);
    const ComplexMatrix k3 = rhs(y + (0.5 * dt) * k2);
    const ComplexMatrix k4 = rhs(y + dt * k3);
    ComplexMatrix next = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

    const double herm = hilbert::hermitize_in_place(next);
    const double tracedev = hilbert::trace_error(next);
    if (diag) {
        diag->herm_dev = herm;
        diag->trace_dev = tracedev;
    }
    if (tracedev > 1e-6)
        throw NumericError("rk4_step: trace deviation " + std::to_string(tracedev) +
                           " exceeds 1e-6 (integrator instability)");
    return DensityMatrix(rho.layout(), std::move(next));
}

// ----- stationarity -----

namespace {

// Earliest recorded time whose trailing window has spread < tol.
std::optional<double> find_stationary(const Trajectory& traj, Index obs, double window, double tol) {
    const auto& times = traj.times;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] - times.front() < window) continue;
        double lo = traj.records[i][static_cast<std::size_t>(obs)];
        double hi = lo;
        for (std::size_t j = i; j-- > 0;) {
            if (times[i] - times[j] > window) break;
            const double v = traj.records[j][static_cast<std::size_t>(obs)];
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (hi - lo < tol) return times[i];
    }
    return std::nullopt;
}

}  // namespace

bool steady_state_reached(const Trajectory& traj, const std::string& observable, double window,
                          double tol) {
    if (traj.times.empty()) throw std::invalid_argument("steady_state_reached: empty trajectory");
    const double span = traj.times.back() - traj.times.front();
    if (window > span) throw std::invalid_argument("steady_state_reached: window exceeds recorded span");
    const Index obs = traj.name_index(observable);
    double lo = traj.records.back()[static_cast<std::size_t>(obs)];
    double hi = lo;
    for (std::size_t j = traj.times.size(); j-- > 0;) {
        if (traj.times.back() - traj.times[j] > window) break;
        const double v = traj.records[j][static_cast<std::size_t>(obs)];
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    return hi - lo < tol;
}

// ----- propagation engines -----

namespace {

// --- dense engine: literal RHS with preallocated workspace ---

class DenseEngine {
  public:
    using State = ComplexMatrix;

    DenseEngine(const SparseOperator& h, const std::vector<LindbladTerm>& terms) : h_(h.matrix()) {
        for (const auto& t : terms) {
            if (t.weight == 0.0) continue;
            weights_.push_back(t.weight);
            xs_.push_back(t.op.matrix());
            xadjs_.emplace_back(xs_.back().adjoint());
            xtxs_.emplace_back(xadjs_.back() * xs_.back());
        }
    }

    State project(const ComplexMatrix& rho) const { return rho; }
    ComplexMatrix assemble(const State& s) const { return s; }
    void alloc_like(const State& ref, State& out) const { out.resizeLike(ref); }

    void rhs(const State& rho, State& out) {
        const Complex mi(0.0, -1.0);
        w1_.noalias() = h_ * rho;
        w2_.noalias() = rho * h_;
        out = mi * (w1_ - w2_);
        for (std::size_t k = 0; k < xs_.size(); ++k) {
            const double w = weights_[k];
            w1_.noalias() = xs_[k] * rho;
            w2_.noalias() = w1_ * xadjs_[k];
            out += (2.0 * w) * w2_;
            w1_.noalias() = xtxs_[k] * rho;
            w2_.noalias() = rho * xtxs_[k];
            out -= w * (w1_ + w2_);
        }
    }

    void stage(State& y, const State& base, double c, const State& k) const { y = base + c * k; }
    void axpy(State& y, double c, const State& k) const { y += c * k; }
    void copy(State& dst, const State& src) const { dst = src; }

    Complex trace(const State& s) const { return s.trace(); }
    double resymmetrize(State& s) const { return hilbert::hermitize_in_place(s); }

    struct Obs {
        SparseCx op;
    };
    Obs prepare(const SparseOperator& op) const { return {op.matrix()}; }
    Complex expect(const State& s, const Obs& o) const {
        Complex tr(0.0, 0.0);
        for (Index k = 0; k < o.op.outerSize(); ++k)
            for (SparseCx::InnerIterator it(o.op, k); it; ++it) tr += it.value() * s(it.col(), it.row());
        return tr;
    }

  private:
    SparseCx h_;
    std::vector<double> weights_;
    std::vector<SparseCx> xs_, xadjs_, xtxs_;
    ComplexMatrix w1_, w2_;
};

// --- graded block engine ---
//
// The operators at hand conserve a grading of the basis: union-find over the
// sparsity patterns yields a partition of basis states such that H is block
// diagonal and every jump operator maps each cell into a single cell.  A
// density matrix supported on the diagonal blocks of that partition stays so
// under the exact dynamics (jumps shift bra and ket together), so the
// evolution closes on the blocks.  For the spin (x) a (x) b system the cells
// are the motional-excitation shells; storing only the diagonal blocks turns
// a 1800^2 dense state into ~70 blocks of order 30 and makes the published
// integration protocol cheap rather than hours-long.  This is a lossless
// change of representation, not an approximation; evolve() cross-checks
// applicability and falls back to the dense engine otherwise.

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    }
    bool unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        if (b < a) std::swap(a, b);  // keep the smaller index as representative
        parent[b] = a;
        return true;
    }
};

class BlockEngine {
  public:
    using State = std::vector<ComplexMatrix>;

    BlockEngine(Index dim, const SparseOperator& h, const std::vector<LindbladTerm>& terms)
        : dim_(dim) {
        build_partition(h, terms);
        build_blocks(h, terms);
    }

    std::size_t num_cells() const { return cells_.size(); }

    // Work ratio of the blocked representation; < 1 means cheaper than dense.
    double fill() const {
        double entries = 0.0;
        for (const auto& c : cells_) entries += double(c.size()) * double(c.size());
        return entries / (double(dim_) * double(dim_));
    }

    bool compatible(const ComplexMatrix& rho) const {
        for (Index j = 0; j < dim_; ++j)
            for (Index i = 0; i < dim_; ++i)
                if (cell_of_[static_cast<std::size_t>(i)] != cell_of_[static_cast<std::size_t>(j)] &&
                    rho(i, j) != Complex(0.0, 0.0))
                    return false;
        return true;
    }

    State project(const ComplexMatrix& rho) const {
        State s(cells_.size());
        for (std::size_t c = 0; c < cells_.size(); ++c) {
            const auto& idx = cells_[c];
            const Index n = static_cast<Index>(idx.size());
            s[c].resize(n, n);
            for (Index j = 0; j < n; ++j)
                for (Index i = 0; i < n; ++i) s[c](i, j) = rho(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
        }
        return s;
    }

    ComplexMatrix assemble(const State& s) const {
        ComplexMatrix rho = ComplexMatrix::Zero(dim_, dim_);
        for (std::size_t c = 0; c < cells_.size(); ++c) {
            const auto& idx = cells_[c];
            const Index n = static_cast<Index>(idx.size());
            for (Index j = 0; j < n; ++j)
                for (Index i = 0; i < n; ++i) rho(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]) = s[c](i, j);
        }
        return rho;
    }

    void alloc_like(const State& ref, State& out) const {
        out.resize(ref.size());
        for (std::size_t c = 0; c < ref.size(); ++c) out[c].resizeLike(ref[c]);
    }

    // out = -i[H, rho] + sum_k w_k D_{x_k}(rho), assuming Hermitian rho
    // (cheap form: one product per cell plus fused monomial sandwiches).
    void rhs(const State& rho, State& out) {
        const Complex mi(0.0, -1.0);
        for (std::size_t c = 0; c < cells_.size(); ++c) {
            const Index n = rho[c].rows();
            auto p = scratch_.topLeftCorner(n, n);
            // P = H_c rho_c via the per-cell CSR
            const auto& hc = h_loc_[c];
            for (Index i = 0; i < n; ++i) {
                p.row(i).setZero();
                for (int e = hc.ptr[static_cast<std::size_t>(i)]; e < hc.ptr[static_cast<std::size_t>(i) + 1]; ++e)
                    p.row(i) += hc.val[static_cast<std::size_t>(e)] * rho[c].row(hc.col[static_cast<std::size_t>(e)]);
            }
            // -i (P - P^dag) - (d_i + d_j) rho_ij
            const auto& d = dsum_[c];
            for (Index j = 0; j < n; ++j)
                for (Index i = 0; i < n; ++i)
                    out[c](i, j) = mi * (p(i, j) - std::conj(p(j, i))) - (d(i) + d(j)) * rho[c](i, j);
        }
        // fused monomial sandwiches: out_dst(r_i, r_j) += 2w v_i conj(v_j) rho_src(c_i, c_j)
        for (const auto& term : mono_terms_) {
            for (std::size_t c = 0; c < cells_.size(); ++c) {
                const auto& blk = term.per_cell[c];
                if (blk.dst < 0) continue;
                auto& dst = out[static_cast<std::size_t>(blk.dst)];
                const auto& src = rho[c];
                const std::size_t m = blk.r.size();
                for (std::size_t j = 0; j < m; ++j) {
                    const Complex fj = term.two_w * std::conj(blk.v[j]);
                    for (std::size_t i = 0; i < m; ++i)
                        dst(blk.r[i], blk.r[j]) += fj * blk.v[i] * src(blk.c[i], blk.c[j]);
                }
            }
        }
        // generic (non-monomial) collapse operators: small dense algebra
        for (const auto& term : gen_terms_) {
            for (std::size_t c = 0; c < cells_.size(); ++c) {
                const auto& blk = term.per_cell[c];
                if (blk.dst >= 0) {
                    auto& dst = out[static_cast<std::size_t>(blk.dst)];
                    dst.noalias() += (2.0 * term.w) * (blk.x * rho[c] * blk.x.adjoint());
                }
                out[c].noalias() -= term.w * (blk.xtx * rho[c] + rho[c] * blk.xtx);
            }
        }
    }

    void stage(State& y, const State& base, double cfac, const State& k) const {
        for (std::size_t c = 0; c < y.size(); ++c) y[c] = base[c] + cfac * k[c];
    }
    void axpy(State& y, double cfac, const State& k) const {
        for (std::size_t c = 0; c < y.size(); ++c) y[c] += cfac * k[c];
    }
    void copy(State& dst, const State& src) const {
        for (std::size_t c = 0; c < dst.size(); ++c) dst[c] = src[c];
    }

    Complex trace(const State& s) const {
        Complex tr(0.0, 0.0);
        for (const auto& b : s) tr += b.trace();
        return tr;
    }

    double resymmetrize(State& s) const {
        double dev = 0.0;
        for (auto& b : s) dev = std::max(dev, hilbert::hermitize_in_place(b));
        return dev;
    }

    // observable restricted to the diagonal blocks (off-block entries always
    // meet zero state entries and drop out exactly)
    struct Obs {
        struct Entry {
            int cell;
            Index i, j;
            Complex v;
        };
        std::vector<Entry> entries;
    };

    Obs prepare(const SparseOperator& op) const {
        Obs o;
        const SparseCx& m = op.matrix();
        for (Index k = 0; k < m.outerSize(); ++k) {
            for (SparseCx::InnerIterator it(m, k); it; ++it) {
                const int ci = cell_of_[static_cast<std::size_t>(it.row())];
                const int cj = cell_of_[static_cast<std::size_t>(it.col())];
                if (ci != cj) continue;
                o.entries.push_back({ci, local_of_[static_cast<std::size_t>(it.row())],
                                     local_of_[static_cast<std::size_t>(it.col())], it.value()});
            }
        }
        return o;
    }

    Complex expect(const State& s, const Obs& o) const {
        Complex tr(0.0, 0.0);
        for (const auto& e : o.entries) tr += e.v * s[static_cast<std::size_t>(e.cell)](e.j, e.i);
        return tr;
    }

  private:
    struct Csr {
        std::vector<int> ptr, col;
        std::vector<Complex> val;
    };
    struct MonoBlock {
        int dst = -1;
        std::vector<Index> r, c;
        std::vector<Complex> v;
    };
    struct MonoTerm {
        Complex two_w;
        std::vector<MonoBlock> per_cell;
    };
    struct GenBlock {
        int dst = -1;
        ComplexMatrix x;    // dst_size x src_size
        ComplexMatrix xtx;  // src_size x src_size
    };
    struct GenTerm {
        double w;
        std::vector<GenBlock> per_cell;
    };

    void build_partition(const SparseOperator& h, const std::vector<LindbladTerm>& terms) {
        UnionFind uf(static_cast<int>(dim_));
        const SparseCx& hm = h.matrix();
        for (Index k = 0; k < hm.outerSize(); ++k)
            for (SparseCx::InnerIterator it(hm, k); it; ++it) uf.unite(static_cast<int>(it.row()), static_cast<int>(it.col()));

        // A jump operator must map each cell into a single cell: union the
        // rows it produces from columns sharing a cell, iterating to fixpoint
        // since each merge can enable further ones.
        bool changed = true;
        while (changed) {
            changed = false;
            for (const auto& t : terms) {
                if (t.weight == 0.0) continue;
                std::map<int, int> image;  // source cell -> row cell
                const SparseCx& xm = t.op.matrix();
                for (Index k = 0; k < xm.outerSize(); ++k) {
                    for (SparseCx::InnerIterator it(xm, k); it; ++it) {
                        const int src = uf.find(static_cast<int>(it.col()));
                        const int row = static_cast<int>(it.row());
                        auto [pos, fresh] = image.try_emplace(src, row);
                        if (!fresh) changed |= uf.unite(pos->second, row);
                    }
                }
            }
        }

        std::map<int, int> root_to_cell;
        for (Index i = 0; i < dim_; ++i) {
            const int root = uf.find(static_cast<int>(i));
            auto [pos, fresh] = root_to_cell.try_emplace(root, static_cast<int>(cells_.size()));
            if (fresh) cells_.emplace_back();
            cells_[static_cast<std::size_t>(pos->second)].push_back(i);
        }
        cell_of_.resize(static_cast<std::size_t>(dim_));
        local_of_.resize(static_cast<std::size_t>(dim_));
        for (std::size_t c = 0; c < cells_.size(); ++c)
            for (std::size_t l = 0; l < cells_[c].size(); ++l) {
                cell_of_[static_cast<std::size_t>(cells_[c][l])] = static_cast<int>(c);
                local_of_[static_cast<std::size_t>(cells_[c][l])] = static_cast<Index>(l);
            }
    }

    void build_blocks(const SparseOperator& h, const std::vector<LindbladTerm>& terms) {
        Index max_n = 0;
        for (const auto& c : cells_) max_n = std::max(max_n, static_cast<Index>(c.size()));
        scratch_.resize(max_n, max_n);

        // H restricted to each cell, as a small CSR
        const SparseCx& hm = h.matrix();
        h_loc_.resize(cells_.size());
        dsum_.resize(cells_.size());
        std::vector<std::vector<std::pair<int, Complex>>> rows;
        for (std::size_t c = 0; c < cells_.size(); ++c) {
            const auto& idx = cells_[c];
            const Index n = static_cast<Index>(idx.size());
            rows.assign(static_cast<std::size_t>(n), {});
            for (Index j = 0; j < n; ++j) {
                for (SparseCx::InnerIterator it(hm, idx[static_cast<std::size_t>(j)]); it; ++it) {
                    // column idx[j] of H; rows inside the cell by construction
                    rows[static_cast<std::size_t>(local_of_[static_cast<std::size_t>(it.row())])].push_back(
                        {static_cast<int>(j), it.value()});
                }
            }
            Csr& csr = h_loc_[c];
            csr.ptr.assign(static_cast<std::size_t>(n) + 1, 0);
            for (Index i = 0; i < n; ++i) {
                std::sort(rows[static_cast<std::size_t>(i)].begin(), rows[static_cast<std::size_t>(i)].end(),
                          [](const auto& a, const auto& b) { return a.first < b.first; });
                csr.ptr[static_cast<std::size_t>(i) + 1] =
                    csr.ptr[static_cast<std::size_t>(i)] + static_cast<int>(rows[static_cast<std::size_t>(i)].size());
                for (const auto& [cc, vv] : rows[static_cast<std::size_t>(i)]) {
                    csr.col.push_back(cc);
                    csr.val.push_back(vv);
                }
            }
            dsum_[c] = Eigen::VectorXd::Zero(n);
        }

        for (const auto& t : terms) {
            if (t.weight == 0.0) continue;
            if (t.op.is_monomial())
                add_monomial(t);
            else
                add_generic(t);
        }
    }

    void add_monomial(const LindbladTerm& t) {
        MonoTerm mt;
        mt.two_w = Complex(2.0 * t.weight, 0.0);
        mt.per_cell.resize(cells_.size());
        const SparseCx& xm = t.op.matrix();
        for (Index k = 0; k < xm.outerSize(); ++k) {
            for (SparseCx::InnerIterator it(xm, k); it; ++it) {
                const int src = cell_of_[static_cast<std::size_t>(it.col())];
                MonoBlock& blk = mt.per_cell[static_cast<std::size_t>(src)];
                blk.dst = cell_of_[static_cast<std::size_t>(it.row())];
                blk.r.push_back(local_of_[static_cast<std::size_t>(it.row())]);
                blk.c.push_back(local_of_[static_cast<std::size_t>(it.col())]);
                blk.v.push_back(it.value());
                // x^dag x is diagonal for a monomial operator
                dsum_[static_cast<std::size_t>(src)](local_of_[static_cast<std::size_t>(it.col())]) +=
                    t.weight * std::norm(it.value());
            }
        }
        mono_terms_.push_back(std::move(mt));
    }

    void add_generic(const LindbladTerm& t) {
        GenTerm gt;
        gt.w = t.weight;
        gt.per_cell.resize(cells_.size());
        const SparseCx& xm = t.op.matrix();
        for (std::size_t c = 0; c < cells_.size(); ++c) {
            // locate the image cell (unique by partition construction)
            int dst = -1;
            for (Index j : cells_[c]) {
                for (SparseCx::InnerIterator it(xm, j); it; ++it) dst = cell_of_[static_cast<std::size_t>(it.row())];
            }
            GenBlock& blk = gt.per_cell[c];
            blk.dst = dst;
            const Index ns = static_cast<Index>(cells_[c].size());
            if (dst >= 0) {
                const Index nd = static_cast<Index>(cells_[static_cast<std::size_t>(dst)].size());
                blk.x = ComplexMatrix::Zero(nd, ns);
                for (Index j = 0; j < ns; ++j)
                    for (SparseCx::InnerIterator it(xm, cells_[c][static_cast<std::size_t>(j)]); it; ++it)
                        blk.x(local_of_[static_cast<std::size_t>(it.row())], j) = it.value();
                blk.xtx = blk.x.adjoint() * blk.x;
            } else {
                blk.xtx = ComplexMatrix::Zero(ns, ns);
            }
        }
        gen_terms_.push_back(std::move(gt));
    }

    Index dim_;
    std::vector<std::vector<Index>> cells_;
    std::vector<int> cell_of_;
    std::vector<Index> local_of_;
    std::vector<Csr> h_loc_;
    std::vector<Eigen::VectorXd> dsum_;
    std::vector<MonoTerm> mono_terms_;
    std::vector<GenTerm> gen_terms_;
    ComplexMatrix scratch_;
};

// --- shared propagation loop ---

template <class Engine>
Trajectory run_rk4(Engine& engine, const DensityMatrix& rho0, const IntegratorSpec& spec,
                   const std::map<std::string, SparseOperator>& observables,
                   const StationaritySpec& stationarity, DensityMatrix* final_state) {
    using State = typename Engine::State;

    Trajectory traj;
    std::vector<typename Engine::Obs> obs;
    for (const auto& [name, op] : observables) {
        traj.names.push_back(name);
        obs.push_back(engine.prepare(op));
    }

    State rho = engine.project(rho0.matrix());
    State k, acc, ytmp;
    engine.alloc_like(rho, k);
    engine.alloc_like(rho, acc);
    engine.alloc_like(rho, ytmp);

    const long steps = spec.total_steps();
    const double dt = spec.dt;

    double last_herm = rho0.hermiticity_error();
    const auto record = [&](long step) {
        const double t = double(step) * dt;
        traj.times.push_back(t);
        std::vector<double> row;
        row.reserve(obs.size());
        for (std::size_t q = 0; q < obs.size(); ++q) {
            const Complex v = engine.expect(rho, obs[q]);
            if (std::abs(v.imag()) > 1e-8)
                throw NumericError("evolve: non-real expectation of '" + traj.names[q] + "' at " +
                                   time_tag(t));
            row.push_back(v.real());
        }
        traj.records.push_back(std::move(row));
        traj.trace_dev.push_back(std::abs(engine.trace(rho) - Complex(1.0, 0.0)));
        traj.herm_dev.push_back(last_herm);
    };

    record(0);
    for (long step = 1; step <= steps; ++step) {
        engine.rhs(rho, k);                    // k1
        engine.copy(acc, k);
        engine.stage(ytmp, rho, 0.5 * dt, k);
        engine.rhs(ytmp, k);                   // k2
        engine.axpy(acc, 2.0, k);
        engine.stage(ytmp, rho, 0.5 * dt, k);
        engine.rhs(ytmp, k);                   // k3
        engine.axpy(acc, 2.0, k);
        engine.stage(ytmp, rho, dt, k);
        engine.rhs(ytmp, k);                   // k4
        engine.axpy(acc, 1.0, k);
        engine.axpy(rho, dt / 6.0, acc);

        last_herm = engine.resymmetrize(rho);
        const double tracedev = std::abs(engine.trace(rho) - Complex(1.0, 0.0));
        if (tracedev > 1e-6)
            throw NumericError("evolve: trace deviation " + std::to_string(tracedev) +
                               " exceeds 1e-6 at " + time_tag(double(step) * dt) +
                               " (integrator instability)");
        if (step % spec.record_stride == 0 || step == steps) record(step);
    }

    if (!traj.names.empty()) {
        const std::string which = stationarity.observable.empty() ? traj.names.front() : stationarity.observable;
        const double window = stationarity.window > 0 ? stationarity.window : 0.1 * spec.t_final;
        traj.stationary_at = find_stationary(traj, traj.name_index(which), window, stationarity.tol);
    }

    if (final_state) *final_state = DensityMatrix(rho0.layout(), engine.assemble(rho));
    return traj;
}

}  // namespace

Trajectory evolve(const DensityMatrix& rho0, const SparseOperator& h,
                  const std::vector<LindbladTerm>& terms, const IntegratorSpec& spec,
                  const std::map<std::string, SparseOperator>& observables,
                  const StationaritySpec& stationarity, DensityMatrix* final_state, EnginePath path) {
    spec.validate();
    if (h.dim() != rho0.dim()) throw std::invalid_argument("evolve: Hamiltonian dim mismatch");
    for (const auto& t : terms)
        if (t.op.dim() != rho0.dim()) throw std::invalid_argument("evolve: collapse operator dim mismatch");
    for (const auto& [name, op] : observables)
        if (op.dim() != rho0.dim())
            throw std::invalid_argument("evolve: observable '" + name + "' dim mismatch");

    if (path != EnginePath::Dense) {
        BlockEngine blocked(rho0.dim(), h, terms);
        const bool useful = blocked.num_cells() > 1 && blocked.fill() <= 0.25;
        const bool fits = blocked.compatible(rho0.matrix());
        if (path == EnginePath::Blocked && !fits)
            throw std::invalid_argument("evolve: initial state not supported on the graded blocks");
        if ((useful && fits) || path == EnginePath::Blocked)
            return run_rk4(blocked, rho0, spec, observables, stationarity, final_state);
    }
    DenseEngine dense(h, terms);
    return run_rk4(dense, rho0, spec, observables, stationarity, final_state);
}

}  // namespace nvcool::liouville
