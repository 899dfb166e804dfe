#include "martkit/als_engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace martkit {

void RegimeMoments::add(const Vector& x, const Vector& y) {
    sxx.noalias() += x * x.transpose();
    syx.noalias() += y * x.transpose();
    syy += y.squaredNorm();
    ++count;
}

RegimeMoments& RegimeMoments::operator+=(const RegimeMoments& other) {
    sxx += other.sxx;
    syx += other.syx;
    syy += other.syy;
    count += other.count;
    return *this;
}

RegimeLayout RegimeLayout::two_way() {
    RegimeLayout l;
    l.n_a = 2;
    l.n_b = 2;
    l.a_index = {0, 0, 1, 1};
    l.b_index = {0, 1, 0, 1};
    return l;
}

RegimeLayout RegimeLayout::per_regime(int regimes) {
    RegimeLayout l;
    l.n_a = regimes;
    l.n_b = regimes;
    l.a_index.resize(static_cast<std::size_t>(regimes));
    std::iota(l.a_index.begin(), l.a_index.end(), 0);
    l.b_index = l.a_index;
    return l;
}

Matrix contract_rows(const Matrix& s, const Matrix& weight, Eigen::Index m, Eigen::Index n) {
    Matrix out(n, n);
    for (Eigen::Index l = 0; l < n; ++l) {
        for (Eigen::Index k = 0; k < n; ++k) {
            double acc = 0.0;
            for (Eigen::Index q = 0; q < m; ++q) {
                const double* col = s.data() + (q + m * l) * s.rows() + m * k;
                for (Eigen::Index p = 0; p < m; ++p) acc += weight(p, q) * col[p];
            }
            out(k, l) = acc;
        }
    }
    return out;
}

Matrix contract_cols(const Matrix& s, const Matrix& weight, Eigen::Index m, Eigen::Index n) {
    Matrix out = Matrix::Zero(m, m);
    for (Eigen::Index l = 0; l < n; ++l) {
        for (Eigen::Index k = 0; k < n; ++k) {
            const double wkl = weight(k, l);
            if (wkl == 0.0) continue;
            out += wkl * s.block(m * k, m * l, m, m);
        }
    }
    return out;
}

Matrix solve_gram(const Matrix& numerator, const Matrix& gram, bool& ridge_used) {
    Eigen::LDLT<Matrix> ldlt(gram);
    if (ldlt.info() == Eigen::Success) {
        const Vector d = ldlt.vectorD();
        const double top = d.cwiseAbs().maxCoeff();
        if (d.minCoeff() > 1e-12 * top && top > 0.0)
            return ldlt.solve(numerator.transpose()).transpose();
    }
    ridge_used = true;
    const double size = static_cast<double>(gram.rows());
    double lambda = 1e-8 * gram.trace() / size;
    if (!(lambda > 0.0)) lambda = 1e-8;
    Matrix ridged = gram;
    ridged.diagonal().array() += lambda;
    Eigen::LDLT<Matrix> fallback(ridged);
    return fallback.solve(numerator.transpose()).transpose();
}

namespace {

struct SideQuantities {
    std::vector<Matrix> num;
    std::vector<Matrix> den;
    std::vector<bool> has_data;
};

// Normal-equation pieces for every B given the current A's.
SideQuantities b_side(const std::vector<RegimeMoments>& moments, const RegimeLayout& layout, const BilinearCoefs& c, Eigen::Index m,
                      Eigen::Index n) {
    SideQuantities q{std::vector<Matrix>(layout.n_b, Matrix::Zero(n, n)),
                     std::vector<Matrix>(layout.n_b, Matrix::Zero(n, n)),
                     std::vector<bool>(layout.n_b, false)};
    std::vector<Matrix> ata(layout.n_a);
    for (int a = 0; a < layout.n_a; ++a) ata[a] = c.a[a].transpose() * c.a[a];
    for (std::size_t k = 0; k < layout.regimes(); ++k) {
        if (moments[k].count == 0) continue;
        const int a = layout.a_index[k];
        const int b = layout.b_index[k];
        q.num[b] += contract_rows(moments[k].syx, c.a[a], m, n);
        q.den[b] += contract_rows(moments[k].sxx, ata[a], m, n);
        q.has_data[b] = true;
    }
    return q;
}

SideQuantities a_side(const std::vector<RegimeMoments>& moments, const RegimeLayout& layout, const BilinearCoefs& c, Eigen::Index m,
                      Eigen::Index n) {
    SideQuantities q{std::vector<Matrix>(layout.n_a, Matrix::Zero(m, m)),
                     std::vector<Matrix>(layout.n_a, Matrix::Zero(m, m)),
                     std::vector<bool>(layout.n_a, false)};
    std::vector<Matrix> btb(layout.n_b);
    for (int b = 0; b < layout.n_b; ++b) btb[b] = c.b[b].transpose() * c.b[b];
    for (std::size_t k = 0; k < layout.regimes(); ++k) {
        if (moments[k].count == 0) continue;
        const int a = layout.a_index[k];
        const int b = layout.b_index[k];
        q.num[a] += contract_cols(moments[k].syx, c.b[b], m, n);
        q.den[a] += contract_cols(moments[k].sxx, btb[b], m, n);
        q.has_data[a] = true;
    }
    return q;
}

// sse = syy - 2 <num, C> + tr(C den C') summed over one side.
double side_sse(double total_syy, const SideQuantities& q, const std::vector<Matrix>& coef) {
    double sse = total_syy;
    for (std::size_t i = 0; i < coef.size(); ++i) {
        if (!q.has_data[i]) continue;
        sse -= 2.0 * q.num[i].cwiseProduct(coef[i]).sum();
        sse += (coef[i] * q.den[i]).cwiseProduct(coef[i]).sum();
    }
    return sse;
}

double side_gradient_sq(const SideQuantities& q, const std::vector<Matrix>& coef) {
    double g = 0.0;
    for (std::size_t i = 0; i < coef.size(); ++i)
        if (q.has_data[i]) g += (coef[i] * q.den[i] - q.num[i]).squaredNorm();
    return g;
}

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int size) : parent(static_cast<std::size_t>(size)) {
        std::iota(parent.begin(), parent.end(), 0);
    }
    int find(int v) {
        while (parent[v] != v) v = parent[v] = parent[parent[v]];
        return v;
    }
    void unite(int a, int b) { parent[find(a)] = find(b); }
};

}  // namespace

void normalize_components(BilinearCoefs& coefs, const RegimeLayout& layout,
                          const std::vector<RegimeMoments>& moments) {
    const int n_a = layout.n_a;
    UnionFind uf(n_a + layout.n_b);
    std::vector<bool> used(static_cast<std::size_t>(n_a + layout.n_b), false);
    for (std::size_t k = 0; k < layout.regimes(); ++k) {
        if (moments[k].count == 0) continue;
        uf.unite(layout.a_index[k], n_a + layout.b_index[k]);
        used[layout.a_index[k]] = true;
        used[n_a + layout.b_index[k]] = true;
    }
    std::vector<bool> done(used.size(), false);
    for (int a = 0; a < n_a; ++a) {
        if (!used[a]) continue;
        const int root = uf.find(a);
        if (done[root]) continue;
        done[root] = true;
        // a is the lowest-index A in its component; find the lowest B.
        int first_b = -1;
        for (int b = 0; b < layout.n_b && first_b < 0; ++b)
            if (used[n_a + b] && uf.find(n_a + b) == root) first_b = b;
        const double c = coefs.a[a].norm();
        if (!(c > 0.0) || first_b < 0) continue;
        const double sign = coefs.b[first_b](0, 0) < 0.0 ? -1.0 : 1.0;
        for (int aa = 0; aa < n_a; ++aa)
            if (used[aa] && uf.find(aa) == root) coefs.a[aa] *= sign / c;
        for (int bb = 0; bb < layout.n_b; ++bb)
            if (used[n_a + bb] && uf.find(n_a + bb) == root) coefs.b[bb] *= sign * c;
    }
}

double moment_sse(const std::vector<RegimeMoments>& moments, const RegimeLayout& layout,
                  const BilinearCoefs& coefs) {
    double sse = 0.0;
    for (std::size_t k = 0; k < layout.regimes(); ++k) {
        const auto& mo = moments[k];
        if (mo.count == 0) continue;
        const Matrix phi = kron(coefs.b[layout.b_index[k]], coefs.a[layout.a_index[k]]);
        sse += mo.syy - 2.0 * phi.cwiseProduct(mo.syx).sum() +
               (phi * mo.sxx).cwiseProduct(phi).sum();
    }
    return sse;
}

AlsOutcome run_als(const std::vector<RegimeMoments>& moments, const RegimeLayout& layout,
                   BilinearCoefs init, const AlsControl& control, double loss_scale) {
    require(moments.size() == layout.regimes(), ErrorKind::InvalidArgument,
            "run_als: one moment block per regime required");
    require(static_cast<int>(init.a.size()) == layout.n_a &&
                static_cast<int>(init.b.size()) == layout.n_b,
            ErrorKind::InvalidArgument, "run_als: initial coefficients do not match the layout");
    require(control.max_iters >= 1 && control.rel_tol > 0.0, ErrorKind::InvalidArgument,
            "run_als: max_iters >= 1 and rel_tol > 0 required");

    const Eigen::Index m = init.a.front().rows();
    const Eigen::Index n = init.b.front().rows();

    double total_syy = 0.0;
    for (const auto& mo : moments) total_syy += mo.syy;
    // Attainable accuracy of moment-based losses.
    const double sse_floor = 1e-13 * total_syy;

    AlsOutcome out;
    out.coefs = std::move(init);
    out.a_held.assign(layout.n_a, false);
    out.b_held.assign(layout.n_b, false);

    normalize_components(out.coefs, layout, moments);
    SideQuantities bq = b_side(moments, layout, out.coefs, m, n);
    double sse = side_sse(total_syy, bq, out.coefs.b);
    out.loss_trace.push_back(sse * loss_scale);

    for (int iter = 1; iter <= control.max_iters; ++iter) {
        for (int b = 0; b < layout.n_b; ++b) {
            if (!bq.has_data[b]) {
                out.b_held[b] = true;
                continue;
            }
            out.coefs.b[b] = solve_gram(bq.num[b], bq.den[b], out.ridge_used);
        }
        SideQuantities aq = a_side(moments, layout, out.coefs, m, n);
        for (int a = 0; a < layout.n_a; ++a) {
            if (!aq.has_data[a]) {
                out.a_held[a] = true;
                continue;
            }
            out.coefs.a[a] = solve_gram(aq.num[a], aq.den[a], out.ridge_used);
        }
        const double prev = sse;
        sse = std::max(side_sse(total_syy, aq, out.coefs.a), 0.0);
        normalize_components(out.coefs, layout, moments);
        out.loss_trace.push_back(sse * loss_scale);
        out.iterations = iter;

        bq = b_side(moments, layout, out.coefs, m, n);
        const bool small_change =
            std::abs(prev - sse) <= control.rel_tol * std::max(prev, 0.0) || sse <= sse_floor;
        if (!small_change) continue;
        if (!control.require_gradient) {
            out.converged = true;
            break;
        }
        double g2 = side_gradient_sq(bq, out.coefs.b);
        const double loss = sse * loss_scale;
        const double tol = control.grad_tol * (1.0 + loss);
        if (2.0 * loss_scale * std::sqrt(g2) <= tol) {
            aq = a_side(moments, layout, out.coefs, m, n);
            g2 += side_gradient_sq(aq, out.coefs.a);
            out.gradient_norm = 2.0 * loss_scale * std::sqrt(g2);
            if (out.gradient_norm <= tol) {
                out.converged = true;
                break;
            }
        }
    }
    if (!out.converged || out.gradient_norm == 0.0) {
        const SideQuantities aq = a_side(moments, layout, out.coefs, m, n);
        out.gradient_norm = 2.0 * loss_scale *
                            std::sqrt(side_gradient_sq(bq, out.coefs.b) +
                                      side_gradient_sq(aq, out.coefs.a));
    }
    out.loss = sse * loss_scale;
    return out;
}

std::vector<RegimeMoments> accumulate_moments(const MatrixSeries& series, std::size_t regimes,
                                              const std::function<int(std::size_t)>& regime_of) {
    const Eigen::Index mn = series.rows() * series.cols();
    std::vector<RegimeMoments> out(regimes, RegimeMoments(mn));
    for (std::size_t t = 1; t < series.length(); ++t) {
        const int k = regime_of(t);
        if (k < 0) continue;
        out[static_cast<std::size_t>(k)].add(vec(series.x[t - 1]), vec(series.x[t]));
    }
    return out;
}

}  // namespace martkit
