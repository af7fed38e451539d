#pragma once

#include <array>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <memory>
#include <vector>

#include "latthom/errors.hpp"

namespace latthom {

using index_t = std::int64_t;

/// Periodic lattice torus (Z/nZ)^d.
///
/// Sites are indexed row-major with the last coordinate fastest.  Each
/// undirected edge is stored once in its canonical form (x, i) = [x, x+e_i],
/// so there are d*n^d edges.  Forward/backward neighbor tables are
/// precomputed; all stencil code goes through them.
class TorusLattice {
  public:
    TorusLattice(int d, int n) : d_(d), n_(n) {
        if (d < 1) throw SizingError("TorusLattice: dimension must be >= 1");
        if (n < 2) throw SizingError("TorusLattice: side length must be >= 2");
        num_sites_ = 1;
        for (int i = 0; i < d; ++i) {
            if (num_sites_ > (index_t(1) << 40) / n)
                throw SizingError("TorusLattice: n^d too large");
            num_sites_ *= n;
        }
        strides_.resize(d);
        strides_[d - 1] = 1;
        for (int i = d - 2; i >= 0; --i) strides_[i] = strides_[i + 1] * n;

        fwd_.resize(static_cast<std::size_t>(num_sites_) * d);
        bwd_.resize(static_cast<std::size_t>(num_sites_) * d);
        std::vector<int> c(d, 0);
        for (index_t x = 0; x < num_sites_; ++x) {
            for (int i = 0; i < d; ++i) {
                const index_t s = strides_[i];
                fwd_[x * d + i] = (c[i] + 1 < n) ? x + s : x - index_t(n - 1) * s;
                bwd_[x * d + i] = (c[i] > 0) ? x - s : x + index_t(n - 1) * s;
            }
            for (int i = d - 1; i >= 0; --i) {
                if (++c[i] < n) break;
                c[i] = 0;
            }
        }
    }

    int dim() const { return d_; }
    int side() const { return n_; }
    index_t num_sites() const { return num_sites_; }
    index_t num_edges() const { return num_sites_ * d_; }

    /// Neighbor x + e_i with periodic wrap.
    index_t forward(index_t x, int i) const { return fwd_[x * d_ + i]; }
    /// Neighbor x - e_i with periodic wrap.
    index_t backward(index_t x, int i) const { return bwd_[x * d_ + i]; }

    index_t site_index(const std::vector<int>& coords) const {
        assert(static_cast<int>(coords.size()) == d_);
        index_t idx = 0;
        for (int i = 0; i < d_; ++i) {
            int c = coords[i] % n_;
            if (c < 0) c += n_;
            idx += strides_[i] * c;
        }
        return idx;
    }

    std::vector<int> site_coords(index_t idx) const {
        std::vector<int> c(d_);
        for (int i = 0; i < d_; ++i) {
            c[i] = static_cast<int>((idx / strides_[i]) % n_);
        }
        return c;
    }

    /// Minimal-image Euclidean distance between two sites.
    double torus_distance(index_t a, index_t b) const {
        double s = 0.0;
        for (int i = 0; i < d_; ++i) {
            int da = static_cast<int>((a / strides_[i]) % n_);
            int db = static_cast<int>((b / strides_[i]) % n_);
            int diff = std::abs(da - db);
            diff = std::min(diff, n_ - diff);
            s += double(diff) * double(diff);
        }
        return std::sqrt(s);
    }

    /// Signed minimal-image displacement of site idx from the origin,
    /// each component in [-n/2, n/2).
    std::vector<int> minimal_image(index_t idx) const {
        std::vector<int> c = site_coords(idx);
        for (int i = 0; i < d_; ++i) {
            if (2 * c[i] >= n_) c[i] -= n_;
        }
        return c;
    }

  private:
    int d_;
    int n_;
    index_t num_sites_;
    std::vector<index_t> strides_;
    std::vector<index_t> fwd_;
    std::vector<index_t> bwd_;
};

using LatticePtr = std::shared_ptr<const TorusLattice>;

inline LatticePtr make_lattice(int d, int n) {
    return std::make_shared<const TorusLattice>(d, n);
}

/// One real per site.
struct NodeField {
    LatticePtr lattice;
    std::vector<double> values;

    NodeField() = default;
    explicit NodeField(LatticePtr lat, double fill = 0.0)
        : lattice(std::move(lat)),
          values(static_cast<std::size_t>(lattice->num_sites()), fill) {}

    double& operator[](index_t x) { return values[static_cast<std::size_t>(x)]; }
    double operator[](index_t x) const { return values[static_cast<std::size_t>(x)]; }
    index_t size() const { return static_cast<index_t>(values.size()); }
};

/// One real per canonical edge, indexed (site, direction).
struct EdgeField {
    LatticePtr lattice;
    std::vector<double> values;

    EdgeField() = default;
    explicit EdgeField(LatticePtr lat, double fill = 0.0)
        : lattice(std::move(lat)),
          values(static_cast<std::size_t>(lattice->num_edges()), fill) {}

    double& at(index_t site, int dir) {
        return values[static_cast<std::size_t>(site * lattice->dim() + dir)];
    }
    double at(index_t site, int dir) const {
        return values[static_cast<std::size_t>(site * lattice->dim() + dir)];
    }
};

/// d forward differences per site (row x holds u(x+e_i)-u(x), i = 1..d).
struct VectorFieldAtSites {
    LatticePtr lattice;
    std::vector<double> values;  // num_sites * d, site-major

    VectorFieldAtSites() = default;
    explicit VectorFieldAtSites(LatticePtr lat, double fill = 0.0)
        : lattice(std::move(lat)),
          values(static_cast<std::size_t>(lattice->num_edges()), fill) {}

    double& at(index_t site, int dir) {
        return values[static_cast<std::size_t>(site * lattice->dim() + dir)];
    }
    double at(index_t site, int dir) const {
        return values[static_cast<std::size_t>(site * lattice->dim() + dir)];
    }
};

/// Forward-difference gradient: component i at x is u(x+e_i) - u(x).
inline VectorFieldAtSites gradient(const NodeField& u) {
    const TorusLattice& lat = *u.lattice;
    const int d = lat.dim();
    VectorFieldAtSites g(u.lattice);
    for (index_t x = 0; x < lat.num_sites(); ++x) {
        const double ux = u[x];
        for (int i = 0; i < d; ++i) g.at(x, i) = u[lat.forward(x, i)] - ux;
    }
    return g;
}

/// Adjoint of the gradient under the counting inner product:
/// sum_x grad(u)(x).F(x) = sum_x u(x) divergence(F)(x) exactly.
/// Componentwise, divergence(F)(x) = sum_i (F_i(x-e_i) - F_i(x)), i.e. the
/// negative of the backward-difference divergence.
inline NodeField divergence(const VectorFieldAtSites& F) {
    const TorusLattice& lat = *F.lattice;
    const int d = lat.dim();
    NodeField out(F.lattice);
    for (index_t x = 0; x < lat.num_sites(); ++x) {
        double s = 0.0;
        for (int i = 0; i < d; ++i) s += F.at(lat.backward(x, i), i) - F.at(x, i);
        out[x] = s;
    }
    return out;
}

/// Conductivity field plus the zero-order mass 1/T, with periodic boundary.
/// Defines the operator u -> mass*u - div*(A grad u), which in the adjoint
/// convention above reads mass*u + divergence(A grad u).
struct OperatorSpec {
    EdgeField conductivity;
    double mass = 0.0;  // equals 1/T; 0 means no zero-order term

    const TorusLattice& lattice() const { return *conductivity.lattice; }
};

/// Applies u -> mass*u - div*(A grad u).  Symmetric and positive
/// semidefinite; Dirichlet form <u, Op u> - mass<u,u> = sum_e a(e) (grad u)^2.
inline NodeField apply_operator(const OperatorSpec& spec, const NodeField& u) {
    const TorusLattice& lat = spec.lattice();
    const int d = lat.dim();
    const double* a = spec.conductivity.values.data();
    const double* uv = u.values.data();
    NodeField out(u.lattice);
    double* ov = out.values.data();
    const double mass = spec.mass;
    for (index_t x = 0; x < lat.num_sites(); ++x) {
        const double ux = uv[x];
        double s = mass * ux;
        for (int i = 0; i < d; ++i) {
            const index_t f = lat.forward(x, i);
            const index_t b = lat.backward(x, i);
            s += a[x * d + i] * (ux - uv[f]) + a[b * d + i] * (ux - uv[b]);
        }
        ov[x] = s;
    }
    return out;
}

/// Smooth averaging mask eta_L >= 0 supported in Q_L = [-L, L)^d centered at
/// the origin, with unit mass (forced by a final normalization).  Profile:
/// product of cos^2(pi x_i / (2L)) over the coordinates.
inline NodeField mask_eta(LatticePtr lattice, int L) {
    const TorusLattice& lat = *lattice;
    if (L < 1) throw SizingError("mask_eta: L must be >= 1");
    if (2 * L > lat.side())
        throw SizingError("mask_eta: Q_L does not fit in the torus (2L > n)");
    NodeField eta(lattice);
    const double pi = 3.14159265358979323846;
    double total = 0.0;
    for (index_t x = 0; x < lat.num_sites(); ++x) {
        std::vector<int> c = lat.minimal_image(x);
        double v = 1.0;
        for (int i = 0; i < lat.dim(); ++i) {
            if (c[i] < -L || c[i] >= L) {
                v = 0.0;
                break;
            }
            const double t = std::cos(pi * c[i] / (2.0 * L));
            v *= t * t;
        }
        eta[x] = v;
        total += v;
    }
    for (auto& v : eta.values) v /= total;
    return eta;
}

/// Uniform mask 1/n^d (the "flat mask override" for whole-torus averages).
inline NodeField flat_mask(LatticePtr lattice) {
    const double w = 1.0 / double(lattice->num_sites());
    return NodeField(std::move(lattice), w);
}

/// Sites with R_lo < |x - center| <= R_hi in the minimal-image metric.
inline std::vector<index_t> annulus_sites(const TorusLattice& lat, index_t center,
                                          double r_lo, double r_hi) {
    assert(r_lo >= 0.0 && r_lo < r_hi);
    std::vector<index_t> out;
    for (index_t x = 0; x < lat.num_sites(); ++x) {
        const double r = lat.torus_distance(x, center);
        if (r > r_lo && r <= r_hi) out.push_back(x);
    }
    return out;
}

// Small reductions used throughout.

inline double spatial_mean(const NodeField& u) {
    double s = 0.0;
    for (double v : u.values) s += v;
    return s / double(u.values.size());
}

inline double dot(const NodeField& a, const NodeField& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) s += a.values[i] * b.values[i];
    return s;
}

inline double norm2(const NodeField& a) { return std::sqrt(dot(a, a)); }

inline double norm_inf(const NodeField& a) {
    double m = 0.0;
    for (double v : a.values) m = std::max(m, std::abs(v));
    return m;
}

}  // namespace latthom
