#include "support.hpp"

#include <algorithm>
#include <limits>

namespace testsupport {

namespace {

double model(const Eigen::MatrixXd& H, const Eigen::VectorXd& g, const Eigen::VectorXd& v) {
    return 0.5 * v.dot(H * v) + g.dot(v);
}

Eigen::VectorXd point(int dim, double rad, double a, double b) {
    Eigen::VectorXd v(dim);
    if (dim == 1) {
        v(0) = rad * (a >= 0 ? 1.0 : -1.0);
    } else if (dim == 2) {
        v << rad * std::cos(a), rad * std::sin(a);
    } else {
        v << rad * std::sin(b) * std::cos(a), rad * std::sin(b) * std::sin(a), rad * std::cos(b);
    }
    return v;
}

}  // namespace

double polar_brute_force(const Eigen::MatrixXd& H, const Eigen::VectorXd& g, double r) {
    const int dim = static_cast<int>(g.size());
    const double pi = std::acos(-1.0);
    double best = 0.0;  // v = 0
    double best_rad = 0.0, best_a = 0.0, best_b = 0.0;
    const int nr = 60;
    const int na = dim == 1 ? 2 : 240;
    const int nb = dim == 3 ? 120 : 1;
    for (int i = 1; i <= nr; ++i) {
        const double rad = r * i / nr;
        for (int ia = 0; ia < na; ++ia) {
            const double a = dim == 1 ? (ia == 0 ? 1.0 : -1.0) : 2.0 * pi * ia / na;
            for (int ib = 0; ib < nb; ++ib) {
                const double b = pi * (ib + 0.5) / nb;
                const double val = model(H, g, point(dim, rad, a, b));
                if (val < best) {
                    best = val;
                    best_rad = rad;
                    best_a = a;
                    best_b = b;
                }
            }
        }
    }
    if (best_rad == 0.0) {
        best_rad = r / nr;
    }
    // Coordinate refinement in (rad, a, b) with shrinking steps.
    double sr = r / nr, sa = dim == 1 ? 0.0 : 2.0 * pi / na, sb = dim == 3 ? pi / nb : 0.0;
    for (int it = 0; it < 200; ++it) {
        bool improved = false;
        for (int c = 0; c < 3; ++c) {
            for (int sgn = -1; sgn <= 1; sgn += 2) {
                double rad = best_rad, a = best_a, b = best_b;
                if (c == 0) rad = std::clamp(rad + sgn * sr, 0.0, r);
                if (c == 1) a += sgn * sa;
                if (c == 2) b = std::clamp(b + sgn * sb, 0.0, pi);
                const double val = model(H, g, point(dim, rad, a, b));
                if (val < best) {
                    best = val;
                    best_rad = rad;
                    best_a = a;
                    best_b = b;
                    improved = true;
                }
            }
        }
        if (!improved) {
            sr *= 0.5;
            sa *= 0.5;
            sb *= 0.5;
        }
    }
    return best;
}

}  // namespace testsupport
