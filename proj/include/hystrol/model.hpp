#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "hystrol/core.hpp"
#include "hystrol/discretization.hpp"

namespace hystrol {

// Reaction term f(y, z) together with the pieces the solvers need: the
// Hadamard directional derivative of f itself (for the non-smooth path) and
// the partial derivatives of the Gateaux-differentiable family f_eps (for
// the regularized path). Smooth models set f_eps == f.
class NonlinearityModel {
public:
    virtual ~NonlinearityModel() = default;

    virtual std::string name() const = 0;
    virtual bool smooth() const = 0;

    // declared audit constants: ||f(y,z)|| <= M (1 + ||y|| + |z|) and
    // sup ||f_eps - f|| <= c eps
    virtual double growth_constant() const = 0;
    virtual double reg_distance_constant() const = 0;

    virtual void eval(const SpatialGrid& g, const Field& y, double z, Field& out) const = 0;
    // f'[(y,z);(v,w)], positively homogeneous in (v,w)
    virtual void dir_deriv(const SpatialGrid& g, const Field& y, double z, const Field& v,
                           double w, Field& out) const = 0;

    virtual void eval_reg(const SpatialGrid& g, const Field& y, double z, double eps,
                          Field& out) const = 0;
    // (d/dy f_eps)(y,z) v and its adjoint in the mass inner product
    virtual void dy_apply_reg(const SpatialGrid& g, const Field& y, double z, const Field& v,
                              double eps, Field& out) const = 0;
    virtual void dy_adjoint_reg(const SpatialGrid& g, const Field& y, double z, const Field& v,
                                double eps, Field& out) const = 0;
    // (d/dz f_eps)(y,z) as a stacked field
    virtual void dz_field_reg(const SpatialGrid& g, const Field& y, double z, double eps,
                              Field& out) const = 0;
};

class ZeroModel final : public NonlinearityModel {
public:
    std::string name() const override { return "zero"; }
    bool smooth() const override { return true; }
    double growth_constant() const override { return 1e-30; }
    double reg_distance_constant() const override { return 0.0; }
    void eval(const SpatialGrid& g, const Field&, double, Field& out) const override {
        out.assign(g.dof(), 0.0);
    }
    void dir_deriv(const SpatialGrid& g, const Field&, double, const Field&, double,
                   Field& out) const override {
        out.assign(g.dof(), 0.0);
    }
    void eval_reg(const SpatialGrid& g, const Field&, double, double, Field& out) const override {
        out.assign(g.dof(), 0.0);
    }
    void dy_apply_reg(const SpatialGrid& g, const Field&, double, const Field&, double,
                      Field& out) const override {
        out.assign(g.dof(), 0.0);
    }
    void dy_adjoint_reg(const SpatialGrid& g, const Field&, double, const Field&, double,
                        Field& out) const override {
        out.assign(g.dof(), 0.0);
    }
    void dz_field_reg(const SpatialGrid& g, const Field&, double, double,
                      Field& out) const override {
        out.assign(g.dof(), 0.0);
    }
};

// f_j(y, z) = sum_k c_jk y_k + g_j(z), one scalar hysteresis feedback per
// component. The smooth variant uses g_j(z) = gain_j tanh(z) throughout; the
// kinked variant replaces g at one component by gain max(0, z), regularized
// by the softplus eps log(1 + exp(z/eps)) whose sup error is eps log 2 and
// whose Lipschitz constant matches the kink's.
class CoupledReactionModel final : public NonlinearityModel {
public:
    CoupledReactionModel(int m, std::vector<double> coupling_row_major, std::vector<double> gains,
                         int kink_component /* <0: smooth everywhere */)
        : m_(m), coupling_(std::move(coupling_row_major)), gains_(std::move(gains)),
          kink_(kink_component) {
        if (static_cast<int>(coupling_.size()) != m_ * m_)
            throw InvalidInput("coupling matrix must be m x m");
        if (static_cast<int>(gains_.size()) != m_) throw InvalidInput("need one gain per component");
        if (kink_ >= m_) throw InvalidInput("kink component out of range");
    }

    std::string name() const override {
        return kink_ < 0 ? "linear-coupling" : "kinked-activation";
    }
    bool smooth() const override { return kink_ < 0; }

    double growth_constant() const override {
        double row = 0.0, col = 0.0;
        for (int j = 0; j < m_; ++j) {
            double r = 0.0;
            for (int k = 0; k < m_; ++k) r += std::abs(c(j, k));
            row = std::max(row, r);
        }
        for (int k = 0; k < m_; ++k) {
            double s = 0.0;
            for (int j = 0; j < m_; ++j) s += std::abs(c(j, k));
            col = std::max(col, s);
        }
        double gain_sum = 0.0;
        for (double gv : gains_) gain_sum += std::abs(gv);
        return std::sqrt(std::max(row * col, 1e-300)) + gain_sum + 1e-12;
    }

    double reg_distance_constant() const override {
        if (kink_ < 0) return 0.0;
        return std::abs(gains_[static_cast<std::size_t>(kink_)]) * std::log(2.0);
    }

    void eval(const SpatialGrid& g, const Field& y, double z, Field& out) const override {
        evaluate(g, y, z, out, [this](int j, double zz) { return g_exact(j, zz); });
    }

    void dir_deriv(const SpatialGrid& g, const Field& y, double z, const Field& v, double w,
                   Field& out) const override {
        (void)y;
        apply_coupling(g, v, out);
        for (int j = 0; j < m_; ++j) {
            const double dg = g_dir(j, z, w);
            if (dg == 0.0) continue;
            for (int i = 0; i < g.n; ++i) out[g.index(j, i)] += dg;
        }
    }

    void eval_reg(const SpatialGrid& g, const Field& y, double z, double eps,
                  Field& out) const override {
        evaluate(g, y, z, out, [this, eps](int j, double zz) { return g_reg(j, zz, eps); });
    }

    void dy_apply_reg(const SpatialGrid& g, const Field&, double, const Field& v, double,
                      Field& out) const override {
        apply_coupling(g, v, out);
    }

    void dy_adjoint_reg(const SpatialGrid& g, const Field&, double, const Field& v, double,
                        Field& out) const override {
        out.assign(g.dof(), 0.0);
        for (int j = 0; j < m_; ++j)
            for (int k = 0; k < m_; ++k) {
                const double cjk = c(j, k);
                if (cjk == 0.0) continue;
                for (int i = 0; i < g.n; ++i) out[g.index(k, i)] += cjk * v[g.index(j, i)];
            }
    }

    void dz_field_reg(const SpatialGrid& g, const Field&, double z, double eps,
                      Field& out) const override {
        out.assign(g.dof(), 0.0);
        for (int j = 0; j < m_; ++j) {
            const double dg = g_reg_slope(j, z, eps);
            if (dg == 0.0) continue;
            for (int i = 0; i < g.n; ++i) out[g.index(j, i)] = dg;
        }
    }

    // exact scalar feedback, exposed for the assumption audits
    double g_exact(int j, double z) const {
        const double gv = gains_[static_cast<std::size_t>(j)];
        if (j == kink_) return gv * std::max(0.0, z);
        return gv * std::tanh(z);
    }

    double g_reg(int j, double z, double eps) const {
        const double gv = gains_[static_cast<std::size_t>(j)];
        if (j == kink_) return gv * softplus(z, eps);
        return gv * std::tanh(z);
    }

private:
    template <typename G>
    void evaluate(const SpatialGrid& g, const Field& y, double z, Field& out, G&& react) const {
        if (g.m != m_) throw InvalidInput("model built for a different component count");
        apply_coupling(g, y, out);
        for (int j = 0; j < m_; ++j) {
            const double gz = react(j, z);
            if (gz == 0.0) continue;
            for (int i = 0; i < g.n; ++i) out[g.index(j, i)] += gz;
        }
    }

    void apply_coupling(const SpatialGrid& g, const Field& v, Field& out) const {
        out.assign(g.dof(), 0.0);
        for (int j = 0; j < m_; ++j)
            for (int k = 0; k < m_; ++k) {
                const double cjk = c(j, k);
                if (cjk == 0.0) continue;
                for (int i = 0; i < g.n; ++i) out[g.index(j, i)] += cjk * v[g.index(k, i)];
            }
    }

    double g_dir(int j, double z, double w) const {
        const double gv = gains_[static_cast<std::size_t>(j)];
        if (j == kink_) {
            if (z > 0.0) return gv * w;
            if (z < 0.0) return 0.0;
            return gv * std::max(0.0, w);
        }
        const double th = std::tanh(z);
        return gv * (1.0 - th * th) * w;
    }

    double g_reg_slope(int j, double z, double eps) const {
        const double gv = gains_[static_cast<std::size_t>(j)];
        if (j == kink_) return gv * logistic(z / eps);
        const double th = std::tanh(z);
        return gv * (1.0 - th * th);
    }

    static double softplus(double z, double eps) {
        const double r = z / eps;
        if (r > 0.0) return z + eps * std::log1p(std::exp(-r));
        return eps * std::log1p(std::exp(r));
    }

    static double logistic(double r) {
        if (r >= 0.0) return 1.0 / (1.0 + std::exp(-r));
        const double e = std::exp(r);
        return e / (1.0 + e);
    }

    double c(int j, int k) const { return coupling_[static_cast<std::size_t>(j * m_ + k)]; }

    int m_;
    std::vector<double> coupling_;
    std::vector<double> gains_;
    int kink_;
};

struct ModelSpec {
    std::string name = "linear-coupling";
    std::vector<double> coupling;  // m x m row-major
    std::vector<double> gains;     // per component
    int kink_component = 0;        // only used by kinked-activation
};

inline std::shared_ptr<NonlinearityModel> make_model(const ModelSpec& spec, int m) {
    if (spec.name == "zero") return std::make_shared<ZeroModel>();
    std::vector<double> coupling = spec.coupling;
    std::vector<double> gains = spec.gains;
    if (coupling.empty()) coupling.assign(static_cast<std::size_t>(m * m), 0.0);
    if (gains.empty()) gains.assign(static_cast<std::size_t>(m), 0.0);
    if (spec.name == "linear-coupling")
        return std::make_shared<CoupledReactionModel>(m, coupling, gains, -1);
    if (spec.name == "kinked-activation")
        return std::make_shared<CoupledReactionModel>(m, coupling, gains, spec.kink_component);
    throw InvalidInput("unknown nonlinearity model: " + spec.name);
}

}  // namespace hystrol
