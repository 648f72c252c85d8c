#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "llab/common.hpp"

namespace llab::geometry {

enum class SurfaceKind { Torus, Sphere };

// Point on the surface in chart coordinates. Torus has the single chart
// [0,1)^2; the sphere has two stereographic charts (0: around z=0, 1: around
// z=infinity, coordinate w = 1/z), transition holomorphic.
struct Point {
    int chart = 0;
    cplx z{};
};

struct WeylFactor;

// Discretized compact surface with conformal metric g = e^sigma |dz|^2.
//
// Torus: n x n grid at z = (j + i*i)/n, sigma = 0, cell weight 1/n^2.
// Sphere: per chart an n x n cell-centered grid over [-B,B]^2 with a C-inf
// partition of unity glued at |z| = 1, so midpoint quadrature of smooth
// integrands converges faster than any power of h.
class Surface {
  public:
    static Surface make(SurfaceKind kind, int n);

    SurfaceKind kind() const { return kind_; }
    int n() const { return n_; }
    int charts() const { return kind_ == SurfaceKind::Sphere ? 2 : 1; }
    std::size_t grid_size() const { return std::size_t(charts()) * n_ * n_; }
    double chart_box() const { return box_; }
    double spacing() const { return h_; }
    int euler_characteristic() const {
        return kind_ == SurfaceKind::Sphere ? 2 : 0;
    }

    // flattened index <-> chart point; layout [chart][i=y][j=x]
    Point point(std::size_t idx) const;
    std::size_t index(int chart, int i, int j) const {
        return (std::size_t(chart) * n_ + i) * n_ + j;
    }

    const std::vector<double>& sigma() const { return sigma_; }
    const std::vector<double>& weights() const { return weights_; }
    const std::vector<double>& curvature() const { return curvature_; }

    double sigma_at(const Point& p) const;  // closed form
    double curvature_at(const Point&) const {
        return kind_ == SurfaceKind::Sphere ? 2.0 : 0.0;
    }

    double volume() const { return volume_; }

    // quadrature of a sampled scalar field
    double integrate(const std::vector<double>& f) const;

    // geodesic distance (unit round sphere / flat unit torus)
    double distance(const Point& a, const Point& b) const;

    // 3D embedding of a sphere point (unit vector); torus: (x, y, 0)
    std::array<double, 3> embed(const Point& p) const;

    // Canonical chart representative: sphere points with |z| > 1 move to the
    // other chart (w = 1/z); torus points wrap into [0,1)^2.
    Point canonical(const Point& p) const;

    // structured-text header (kind, n, box)
    std::string header() const;

  private:
    Surface() = default;
    void set_arrays(std::vector<double> sigma, std::vector<double> weights,
                    std::vector<double> curvature);
    friend Surface weyl_transform(const Surface&, const WeylFactor&);

    SurfaceKind kind_{};
    int n_ = 0;
    double box_ = 0.0;
    double h_ = 0.0;
    double volume_ = 0.0;
    std::vector<double> sigma_, weights_, curvature_;
};

// Smooth partition-of-unity cutoff for the sphere charts:
// chi(r) + chi(1/r) = 1, chi = 1 for r <= 1/r_edge, 0 for r >= r_edge.
double chart_cutoff(double r);
double chart_cutoff_edge();

// Symmetric rank-(2,0) tensor field in chart components: the complex
// traceless component f^{zz} and the real mixed component f^{z zbar}
// (tr_g f = e^sigma f^{z zbar}). Storing the two components separately makes
// the trace/traceless split structural.
struct TensorField2 {
    std::vector<cplx> f_zz_up;
    std::vector<double> f_zzbar_up;

    static TensorField2 zero(const Surface& s);
    // tr_g(f) as a sampled scalar
    std::vector<double> trace_g(const Surface& s) const;
};

struct TraceSplit {
    TensorField2 traceless;   // (f^{zz}, 0)
    TensorField2 trace_part;  // (0, f^{z zbar})
};
TraceSplit split_trace(const Surface& s, const TensorField2& f);

// Weyl factor omega with band-limit metadata. Chart gradient d/dz omega and
// Laplace-Beltrami of omega ride along when the field was synthesized
// spectrally; downstream formulas then avoid grid differencing entirely.
struct WeylFactor {
    std::vector<double> omega;
    int band = 0;
    std::optional<std::vector<cplx>> grad_z;
    std::optional<std::vector<double>> lap_g;

    static WeylFactor constant(const Surface& s, double c);
};

Surface make_surface(SurfaceKind kind, int n);

// A(omega, g) = (1/48pi) Int( 1/2 |d omega|^2 + K_g omega ) dv_g
double anomaly_functional(const WeylFactor& omega, const Surface& s);

// surface with conformal factor sigma + omega (weights, curvature, volume
// recomputed)
Surface weyl_transform(const Surface& s, const WeylFactor& omega);

// Pointwise first variation of scalar curvature for the inverse-metric
// perturbation g_eps^{ab} = g^{ab} + eps f^{ab}. The paper's lower-index
// formula is converted with delta g_ab = -g_am g_bn delta g^mn.
std::vector<double> curvature_variation(const Surface& s,
                                        const TensorField2& f);

// L^2-orthogonal split of a traceless tensor into the divergence-free
// (moduli) sector and its complement; torus only unless allow_sphere, in
// which case the sphere returns (f, 0).
struct DmSplit {
    TensorField2 f_d;
    TensorField2 f_m;
};
DmSplit tensor_decompose(const Surface& s, const TensorField2& f,
                         bool allow_sphere = false);

double conformal_weight(double alpha, double gamma);
double background_charge(double gamma);  // Q = 2/gamma + gamma/2

// L^2 inner product of tensor fields, (f1,f2)_g = Int f1^{ab} f2_{ab} dv_g
double tensor_inner(const Surface& s, const TensorField2& a,
                    const TensorField2& b);

// CSV grid export (row-major with a header documenting origin/spacing)
void write_csv_grid(const std::string& path, const Surface& s,
                    const std::vector<double>& field);

}  // namespace llab::geometry
