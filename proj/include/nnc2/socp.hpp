#ifndef NNC2_SOCP_HPP
#define NNC2_SOCP_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "errors.hpp"

namespace nnc2 {

// ||A z[idx] + b|| <= f . z[idx] + d.  With A empty this is the linear constraint f.z + d >= 0.
struct Cone {
    std::vector<int> idx;
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
    Eigen::VectorXd f;
    double d = 0;
};

struct SocpResult {
    Eigen::VectorXd z;
    double upper = 0;  // objective at z
    double lower = 0;  // objective minus the complementarity gap
    int newton_steps = 0;
    bool converged = false;
};

struct SocpOptions {
    double abs_gap = 1e-10;
    double rel_gap = 1e-8;
    double feas_tol = 1e-9;
    int max_iter = 200;
};

// Primal-dual interior point method (Nesterov-Todd scaling, Mehrotra predictor-corrector) for
//   min c.z  s.t.  G z + s = h,  s in K,
// where each cone contributes the block s = (f.z + d, A z + b).
class SocpSolver {
public:
    SocpSolver(int n, std::vector<Cone> cones) : n_(n), cones_(std::move(cones)) {
        int off = 0;
        for (auto& k : cones_) {
            Block bl;
            bl.m = 1 + int(k.A.rows());
            bl.off = off;
            off += bl.m;
            bl.G = Eigen::MatrixXd::Zero(bl.m, Eigen::Index(k.idx.size()));
            bl.h = Eigen::VectorXd::Zero(bl.m);
            bl.G.row(0) = -k.f.transpose();
            bl.h[0] = k.d;
            if (k.A.rows() > 0) {
                bl.G.bottomRows(k.A.rows()) = -k.A;
                bl.h.tail(k.A.rows()) = k.b;
            }
            blocks_.push_back(std::move(bl));
        }
        m_ = off;
    }

    // z0 is accepted for interface stability; the method starts from its own point.
    SocpResult minimize(const Eigen::VectorXd& c, const Eigen::VectorXd& z0, const SocpOptions& opt = {}) const {
        (void)z0;
        if (cones_.empty()) throw InternalError("socp: no constraints");
        const int K = int(blocks_.size());
        Eigen::VectorXd x(n_), s(m_), y(m_);
        init(c, x, s, y);
        SocpResult res;
        double hn = std::max(1.0, hnorm()), cn = std::max(1.0, c.norm());
        std::vector<Scaling> W(K);
        Eigen::VectorXd lam(m_);
        Eigen::VectorXd bx = x;
        double best_merit = HUGE_VAL, bgap = HUGE_VAL;
        for (int it = 0; it < opt.max_iter; ++it) {
            Eigen::VectorXd rx = gt_mul(y) + c;          // dual residual
            Eigen::VectorXd rz = g_mul(x) + s - h_vec(); // primal residual
            double gap = s.dot(y), mu = gap / K;
            double pobj = c.dot(x);
            res.newton_steps = it;
            double pres = rz.norm() / hn, dres = rx.norm() / cn;
            double merit = std::max({pres, dres, gap / (opt.abs_gap + opt.rel_gap * std::abs(pobj))});
            if (merit < best_merit) best_merit = merit, bx = x, bgap = gap;
            if (pres <= opt.feas_tol && dres <= opt.feas_tol && gap <= opt.abs_gap + opt.rel_gap * std::abs(pobj)) {
                res.converged = true;
                break;
            }
            if (merit > 1e6 * best_merit) break;
            for (int k = 0; k < K; ++k) {
                const auto& bl = blocks_[k];
                W[k] = nt_scaling(s.segment(bl.off, bl.m), y.segment(bl.off, bl.m));
                lam.segment(bl.off, bl.m) = W[k].W * y.segment(bl.off, bl.m);
            }
            Eigen::MatrixXd N = normal_matrix(W);
            Eigen::VectorXd dsc = N.diagonal().cwiseAbs().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
            Eigen::MatrixXd Ns = dsc.asDiagonal() * N * dsc.asDiagonal();
            Ns.diagonal().array() += 1e-14;
            Eigen::LDLT<Eigen::MatrixXd> ldlt(Ns);

            // Newton system: G^T dy = -ex, G dx + ds = -ez, lam o (W dy + W^-T ds) = rs
            auto solve1 = [&](const Eigen::VectorXd& ex, const Eigen::VectorXd& ez, const Eigen::VectorXd& rs,
                              Eigen::VectorXd& dx, Eigen::VectorXd& ds, Eigen::VectorXd& dy) {
                Eigen::VectorXd Wu(m_);
                for (int k = 0; k < K; ++k) {
                    const auto& bl = blocks_[k];
                    Eigen::VectorXd u = inv_prod(lam.segment(bl.off, bl.m), rs.segment(bl.off, bl.m));
                    Wu.segment(bl.off, bl.m) = W[k].W * u;
                }
                Eigen::VectorXd t = Wu + ez;
                Eigen::VectorXd rhs = -ex - gt_mul(winv2_mul(W, t));
                dx = dsc.asDiagonal() * ldlt.solve(dsc.asDiagonal() * rhs);
                dy = winv2_mul(W, g_mul(dx) + t);
                ds = Wu - w2_mul(W, dy);
            };
            auto solve = [&](const Eigen::VectorXd& rs, Eigen::VectorXd& dx, Eigen::VectorXd& ds, Eigen::VectorXd& dy) {
                solve1(rx, rz, rs, dx, ds, dy);
                for (int ref = 0; ref < 2; ++ref) {
                    Eigen::VectorXd e1 = gt_mul(dy) + rx;
                    Eigen::VectorXd e2 = g_mul(dx) + ds + rz;
                    Eigen::VectorXd cx, cs, cy;
                    solve1(e1, e2, Eigen::VectorXd::Zero(m_), cx, cs, cy);
                    dx += cx, ds += cs, dy += cy;
                }
            };

            Eigen::VectorXd rs(m_);
            for (int k = 0; k < K; ++k) {
                const auto& bl = blocks_[k];
                rs.segment(bl.off, bl.m) = -jordan(lam.segment(bl.off, bl.m), lam.segment(bl.off, bl.m));
            }
            Eigen::VectorXd dxa, dsa, dya;
            solve(rs, dxa, dsa, dya);
            double aa = std::min({1.0, max_step(s, dsa), max_step(y, dya)});
            double gap_a = (s + aa * dsa).dot(y + aa * dya);
            double sigma = std::pow(std::clamp(gap_a / std::max(gap, 1e-300), 0.0, 1.0), 3);

            for (int k = 0; k < K; ++k) {
                const auto& bl = blocks_[k];
                Eigen::VectorXd a = W[k].Winv * dsa.segment(bl.off, bl.m);
                Eigen::VectorXd b = W[k].W * dya.segment(bl.off, bl.m);
                Eigen::VectorXd e = Eigen::VectorXd::Zero(bl.m);
                e[0] = 1;
                rs.segment(bl.off, bl.m) -= jordan(a, b) - sigma * mu * e;
            }
            Eigen::VectorXd dx, ds, dy;
            solve(rs, dx, ds, dy);
            double a = std::min(1.0, 0.99 * std::min(max_step(s, ds), max_step(y, dy)));
            x += a * dx;
            s += a * ds;
            y += a * dy;
            if (!x.allFinite() || !s.allFinite() || !y.allFinite()) break;
            res.newton_steps = it + 1;
        }
        if (res.converged) bx = x, bgap = s.dot(y);
        if (!bx.allFinite()) throw InternalError("socp: non-finite iterate");
        res.z = bx;
        res.upper = c.dot(bx);
        res.lower = res.upper - bgap;
        return res;
    }

    double nu() const { return double(blocks_.size()); }

private:
    struct Block {
        int m = 1, off = 0;
        Eigen::MatrixXd G;  // m x |idx|
        Eigen::VectorXd h;
    };
    struct Scaling {
        Eigen::MatrixXd W, Winv;
    };

    static Eigen::VectorXd jordan(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
        Eigen::VectorXd r(u.size());
        r[0] = u.dot(v);
        if (u.size() > 1) r.tail(u.size() - 1) = u[0] * v.tail(v.size() - 1) + v[0] * u.tail(u.size() - 1);
        return r;
    }

    // x with lam o x = r
    static Eigen::VectorXd inv_prod(const Eigen::VectorXd& l, const Eigen::VectorXd& r) {
        Eigen::VectorXd x(l.size());
        if (l.size() == 1) {
            x[0] = r[0] / l[0];
            return x;
        }
        auto l1 = l.tail(l.size() - 1);
        auto r1 = r.tail(r.size() - 1);
        double det = l[0] * l[0] - l1.squaredNorm();
        x[0] = (l[0] * r[0] - l1.dot(r1)) / det;
        x.tail(l.size() - 1) = (r1 - x[0] * l1) / l[0];
        return x;
    }

    static double jdet(const Eigen::VectorXd& u) {
        if (u.size() == 1) return u[0];
        return (u[0] - u.tail(u.size() - 1).norm()) * (u[0] + u.tail(u.size() - 1).norm());
    }

    static Scaling nt_scaling(const Eigen::VectorXd& s, const Eigen::VectorXd& z) {
        Scaling sc;
        int m = int(s.size());
        if (m == 1) {
            double w = std::sqrt(s[0] / z[0]);
            sc.W = Eigen::MatrixXd::Constant(1, 1, w);
            sc.Winv = Eigen::MatrixXd::Constant(1, 1, 1 / w);
            return sc;
        }
        double ns = std::sqrt(std::max(jdet(s), 1e-300)), nz = std::sqrt(std::max(jdet(z), 1e-300));
        Eigen::VectorXd sb = s / ns, zb = z / nz;
        double gamma = std::sqrt(std::max((1 + sb.dot(zb)) / 2, 1e-300));
        Eigen::VectorXd w(m);
        w[0] = (sb[0] + zb[0]) / (2 * gamma);
        w.tail(m - 1) = (sb.tail(m - 1) - zb.tail(m - 1)) / (2 * gamma);
        double beta = std::sqrt(ns / nz);
        Eigen::MatrixXd Wb(m, m);
        auto w1 = w.tail(m - 1);
        Wb(0, 0) = w[0];
        Wb.block(0, 1, 1, m - 1) = w1.transpose();
        Wb.block(1, 0, m - 1, 1) = w1;
        Wb.block(1, 1, m - 1, m - 1) =
            Eigen::MatrixXd::Identity(m - 1, m - 1) + w1 * w1.transpose() / (1 + w[0]);
        Eigen::MatrixXd Wbi = Wb;  // J Wb J
        Wbi.block(0, 1, 1, m - 1) *= -1;
        Wbi.block(1, 0, m - 1, 1) *= -1;
        sc.W = beta * Wb;
        sc.Winv = Wbi / beta;
        return sc;
    }

    // largest a with u + a du in the cone product (capped at 1e30)
    double max_step(const Eigen::VectorXd& u, const Eigen::VectorXd& du) const {
        double amax = 1e30;
        for (const auto& bl : blocks_) {
            if (bl.m == 1) {
                if (du[bl.off] < 0) amax = std::min(amax, -u[bl.off] / du[bl.off]);
                continue;
            }
            double x0 = u[bl.off], d0 = du[bl.off];
            auto x1 = u.segment(bl.off + 1, bl.m - 1);
            auto d1 = du.segment(bl.off + 1, bl.m - 1);
            double qa = d0 * d0 - d1.squaredNorm();
            double qb = 2 * (x0 * d0 - x1.dot(d1));
            double qc = std::max(x0 * x0 - x1.squaredNorm(), 0.0);
            double root = 1e30;
            if (std::abs(qa) <= 1e-15 * (d0 * d0 + d1.squaredNorm())) {
                if (qb < 0) root = -qc / qb;
            } else {
                double disc = qb * qb - 4 * qa * qc;
                if (qa < 0) {
                    double sq = std::sqrt(std::max(disc, 0.0));
                    root = (-qb - sq) / (2 * qa);
                } else if (disc >= 0 && qb < 0) {
                    double sq = std::sqrt(disc);
                    root = (2 * qc) / (-qb + sq);
                }
            }
            if (d0 < 0) root = std::min(root, -x0 / d0);
            amax = std::min(amax, std::max(root, 0.0));
        }
        return amax;
    }

    Eigen::VectorXd h_vec() const {
        Eigen::VectorXd h(m_);
        for (const auto& bl : blocks_) h.segment(bl.off, bl.m) = bl.h;
        return h;
    }
    double hnorm() const { return h_vec().norm(); }

    Eigen::VectorXd g_mul(const Eigen::VectorXd& x) const {
        Eigen::VectorXd r(m_);
        for (std::size_t k = 0; k < blocks_.size(); ++k) {
            const auto& bl = blocks_[k];
            Eigen::VectorXd loc(Eigen::Index(cones_[k].idx.size()));
            for (std::size_t a = 0; a < cones_[k].idx.size(); ++a) loc[Eigen::Index(a)] = x[cones_[k].idx[a]];
            r.segment(bl.off, bl.m) = bl.G * loc;
        }
        return r;
    }

    Eigen::VectorXd gt_mul(const Eigen::VectorXd& y) const {
        Eigen::VectorXd r = Eigen::VectorXd::Zero(n_);
        for (std::size_t k = 0; k < blocks_.size(); ++k) {
            const auto& bl = blocks_[k];
            Eigen::VectorXd loc = bl.G.transpose() * y.segment(bl.off, bl.m);
            for (std::size_t a = 0; a < cones_[k].idx.size(); ++a) r[cones_[k].idx[a]] += loc[Eigen::Index(a)];
        }
        return r;
    }

    Eigen::VectorXd winv2_mul(const std::vector<Scaling>& W, const Eigen::VectorXd& v) const {
        Eigen::VectorXd r(m_);
        for (std::size_t k = 0; k < blocks_.size(); ++k) {
            const auto& bl = blocks_[k];
            r.segment(bl.off, bl.m) = W[k].Winv * (W[k].Winv * v.segment(bl.off, bl.m));
        }
        return r;
    }

    Eigen::VectorXd w2_mul(const std::vector<Scaling>& W, const Eigen::VectorXd& v) const {
        Eigen::VectorXd r(m_);
        for (std::size_t k = 0; k < blocks_.size(); ++k) {
            const auto& bl = blocks_[k];
            r.segment(bl.off, bl.m) = W[k].W * (W[k].W * v.segment(bl.off, bl.m));
        }
        return r;
    }

    Eigen::MatrixXd normal_matrix(const std::vector<Scaling>& W) const {
        Eigen::MatrixXd N = Eigen::MatrixXd::Zero(n_, n_);
        for (std::size_t k = 0; k < blocks_.size(); ++k) {
            Eigen::MatrixXd B = W[k].Winv * blocks_[k].G;
            Eigen::MatrixXd L = B.transpose() * B;
            const auto& idx = cones_[k].idx;
            for (std::size_t a = 0; a < idx.size(); ++a)
                for (std::size_t b = 0; b < idx.size(); ++b) N(idx[a], idx[b]) += L(Eigen::Index(a), Eigen::Index(b));
        }
        return N;
    }

    // shift u into the interior: u + (1 + t) e with t the smallest making it feasible
    void center(Eigen::VectorXd& u) const {
        double t = -HUGE_VAL;
        for (const auto& bl : blocks_) {
            double v = bl.m == 1 ? -u[bl.off] : u.segment(bl.off + 1, bl.m - 1).norm() - u[bl.off];
            t = std::max(t, v);
        }
        if (t >= -1e-8) {
            for (const auto& bl : blocks_) u[bl.off] += 1 + t;
        }
    }

    void init(const Eigen::VectorXd& c, Eigen::VectorXd& x, Eigen::VectorXd& s, Eigen::VectorXd& y) const {
        Eigen::MatrixXd GtG = Eigen::MatrixXd::Zero(n_, n_);
        for (std::size_t k = 0; k < blocks_.size(); ++k) {
            Eigen::MatrixXd L = blocks_[k].G.transpose() * blocks_[k].G;
            const auto& idx = cones_[k].idx;
            for (std::size_t a = 0; a < idx.size(); ++a)
                for (std::size_t b = 0; b < idx.size(); ++b) GtG(idx[a], idx[b]) += L(Eigen::Index(a), Eigen::Index(b));
        }
        double tr = std::max(GtG.diagonal().maxCoeff(), 1e-300);
        GtG.diagonal().array() += 1e-12 * tr;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(GtG);
        Eigen::VectorXd h = h_vec();
        x = ldlt.solve(gt_mul(h));
        s = h - g_mul(x);
        center(s);
        y = -g_mul(ldlt.solve(c));
        center(y);
    }

    int n_, m_ = 0;
    std::vector<Cone> cones_;
    std::vector<Block> blocks_;
};

} // namespace nnc2

#endif
