#include "core/econometrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "core/errors.hpp"

namespace superspill {

void RegressionSpec::validate() const {
    if (dependent.empty()) throw ConfigError("regression '" + name + "': dependent is empty");
    if (instruments.size() < endogenous.size())
        throw ConfigError("regression '" + name + "': fewer instruments than endogenous columns");
    std::map<std::string, std::string> role;
    auto claim = [&](const std::string& col, const std::string& r) {
        auto [it, inserted] = role.emplace(col, r);
        if (!inserted)
            throw ConfigError("regression '" + name + "': column '" + col + "' appears as both " +
                              it->second + " and " + r);
    };
    claim(dependent, "dependent");
    for (const auto& c : endogenous) claim(c, "endogenous");
    for (const auto& c : instruments) claim(c, "instrument");
    for (const auto& c : exogenous) claim(c, "exogenous");
    if (cluster.empty()) throw ConfigError("regression '" + name + "': cluster is empty");
}

void Frame::add_numeric(const std::string& name, std::vector<std::optional<double>> col) {
    if (n_rows == 0 && numeric.empty() && keys.empty()) n_rows = col.size();
    if (col.size() != n_rows)
        throw ConfigError("column '" + name + "' length " + std::to_string(col.size()) +
                          " != frame rows " + std::to_string(n_rows));
    numeric[name] = std::move(col);
}

void Frame::add_key(const std::string& name, std::vector<std::string> col) {
    if (n_rows == 0 && numeric.empty() && keys.empty()) n_rows = col.size();
    if (col.size() != n_rows)
        throw ConfigError("key column '" + name + "' length mismatch");
    keys[name] = std::move(col);
}

namespace {

const std::vector<std::optional<double>>& numeric_col(const Frame& f, const std::string& name) {
    auto it = f.numeric.find(name);
    if (it == f.numeric.end()) throw ConfigError("unknown numeric column '" + name + "'");
    return it->second;
}

const std::vector<std::string>& key_col(const Frame& f, const std::string& name) {
    auto it = f.keys.find(name);
    if (it == f.keys.end()) throw ConfigError("unknown key column '" + name + "'");
    return it->second;
}

std::vector<int> contiguous_ids(const std::vector<std::string>& raw,
                                const std::vector<std::size_t>& keep) {
    std::map<std::string, int> ids;
    std::vector<int> out;
    out.reserve(keep.size());
    for (std::size_t i : keep) {
        auto [it, inserted] = ids.emplace(raw[i], static_cast<int>(ids.size()));
        out.push_back(it->second);
    }
    return out;
}

Eigen::MatrixXd gather(const Frame& f, const std::vector<std::string>& names,
                       const std::vector<std::size_t>& keep) {
    Eigen::MatrixXd m(keep.size(), names.size());
    for (std::size_t j = 0; j < names.size(); ++j) {
        const auto& col = numeric_col(f, names[j]);
        for (std::size_t i = 0; i < keep.size(); ++i) m(i, j) = *col[keep[i]];
    }
    return m;
}

}  // namespace

RegressionData assemble(const Frame& frame, const RegressionSpec& spec) {
    spec.validate();
    std::vector<std::string> used = {spec.dependent};
    for (auto* v : {&spec.endogenous, &spec.instruments, &spec.exogenous})
        used.insert(used.end(), v->begin(), v->end());
    if (spec.weights) used.push_back(*spec.weights);

    std::vector<const std::vector<std::optional<double>>*> cols;
    for (const auto& n : used) cols.push_back(&numeric_col(frame, n));
    std::vector<const std::vector<std::string>*> keycols;
    for (const auto& n : spec.fe_dims) keycols.push_back(&key_col(frame, n));
    keycols.push_back(&key_col(frame, spec.cluster));

    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < frame.n_rows; ++i) {
        bool ok = true;
        for (auto* c : cols)
            if (!(*c)[i]) { ok = false; break; }
        if (ok)
            for (auto* k : keycols)
                if ((*k)[i].empty()) { ok = false; break; }
        if (ok) keep.push_back(i);
    }
    std::size_t dropped_missing = frame.n_rows - keep.size();

    // Iteratively drop singleton FE groups: a row alone in any group carries
    // no identifying variation once absorbed.
    std::size_t singletons = 0;
    bool changed = true;
    while (changed && !spec.fe_dims.empty()) {
        changed = false;
        for (std::size_t d = 0; d < (spec.interact_fe ? 1u : spec.fe_dims.size()); ++d) {
            std::map<std::string, int> counts;
            auto label = [&](std::size_t row) {
                if (!spec.interact_fe) return key_col(frame, spec.fe_dims[d])[row];
                std::string s;
                for (const auto& dim : spec.fe_dims) s += key_col(frame, dim)[row] + "\x1f";
                return s;
            };
            for (std::size_t i : keep) ++counts[label(i)];
            std::vector<std::size_t> next;
            next.reserve(keep.size());
            for (std::size_t i : keep) {
                if (counts[label(i)] <= 1) {
                    ++singletons;
                    changed = true;
                } else {
                    next.push_back(i);
                }
            }
            keep.swap(next);
        }
    }

    RegressionData d;
    d.rows_dropped_missing = dropped_missing;
    d.singletons_dropped = singletons;
    d.endog_names = spec.endogenous;
    d.instrument_names = spec.instruments;
    d.exog_names = spec.exogenous;

    d.y.resize(keep.size());
    {
        const auto& col = numeric_col(frame, spec.dependent);
        for (std::size_t i = 0; i < keep.size(); ++i) d.y(i) = *col[keep[i]];
    }
    d.endog = gather(frame, spec.endogenous, keep);
    d.instruments = gather(frame, spec.instruments, keep);
    d.exog = gather(frame, spec.exogenous, keep);
    if (spec.weights) {
        const auto& col = numeric_col(frame, *spec.weights);
        d.weights.resize(keep.size());
        for (std::size_t i = 0; i < keep.size(); ++i) d.weights(i) = *col[keep[i]];
    }
    if (spec.interact_fe && !spec.fe_dims.empty()) {
        std::vector<std::string> combined(frame.n_rows);
        for (std::size_t i : keep) {
            std::string s;
            for (const auto& dim : spec.fe_dims) s += key_col(frame, dim)[i] + "\x1f";
            combined[i] = s;
        }
        d.fe.push_back(contiguous_ids(combined, keep));
    } else {
        for (const auto& dim : spec.fe_dims)
            d.fe.push_back(contiguous_ids(key_col(frame, dim), keep));
    }
    d.cluster = contiguous_ids(key_col(frame, spec.cluster), keep);
    return d;
}

AbsorbResult absorb_fixed_effects(Eigen::MatrixXd& columns,
                                  const std::vector<std::vector<int>>& fe,
                                  const Eigen::VectorXd& weights, double tol) {
    AbsorbResult res;
    if (fe.empty() || columns.rows() == 0) return res;
    const Eigen::Index n = columns.rows();
    for (const auto& dim : fe)
        if (static_cast<Eigen::Index>(dim.size()) != n)
            throw ConfigError("fixed-effect dimension length mismatch");

    std::vector<int> n_groups(fe.size(), 0);
    for (std::size_t d = 0; d < fe.size(); ++d)
        n_groups[d] = fe[d].empty() ? 0 : *std::max_element(fe[d].begin(), fe[d].end()) + 1;

    bool weighted = weights.size() == n;
    Eigen::VectorXd w = weighted ? weights : Eigen::VectorXd::Ones(n);

    std::vector<Eigen::VectorXd> group_w(fe.size());
    for (std::size_t d = 0; d < fe.size(); ++d) {
        group_w[d] = Eigen::VectorXd::Zero(n_groups[d]);
        for (Eigen::Index i = 0; i < n; ++i) group_w[d](fe[d][i]) += w(i);
    }

    const int kMaxSweeps = 10000;
    for (int sweep = 1; sweep <= kMaxSweeps; ++sweep) {
        double max_change = 0.0;
        for (std::size_t d = 0; d < fe.size(); ++d) {
            Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(n_groups[d], columns.cols());
            for (Eigen::Index i = 0; i < n; ++i)
                sums.row(fe[d][i]) += w(i) * columns.row(i);
            for (int g = 0; g < n_groups[d]; ++g)
                if (group_w[d](g) > 0.0) sums.row(g) /= group_w[d](g);
            for (Eigen::Index i = 0; i < n; ++i) {
                columns.row(i) -= sums.row(fe[d][i]);
                double c = sums.row(fe[d][i]).cwiseAbs().maxCoeff();
                if (c > max_change) max_change = c;
            }
        }
        res.iterations = sweep;
        if (max_change < tol) return res;
    }
    throw NumericError("fixed-effect absorption did not converge in 10000 sweeps");
}

namespace {

struct LsFit {
    Eigen::VectorXd beta;
    Eigen::VectorXd residuals;
    Eigen::MatrixXd xtx_inv;
};

// Weighted least squares with rank check; names used only for diagnostics.
LsFit least_squares(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                    const Eigen::VectorXd& w, const std::vector<std::string>& names) {
    Eigen::MatrixXd Xw = X;
    Eigen::VectorXd yw = y;
    if (w.size() == y.size()) {
        Eigen::VectorXd sw = w.cwiseSqrt();
        Xw = sw.asDiagonal() * X;
        yw = sw.asDiagonal() * y;
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xw);
    qr.setThreshold(1e-10);
    if (qr.rank() < X.cols()) {
        // Pivoted-out trailing columns are the collinear ones.
        std::string bad;
        const auto& perm = qr.colsPermutation().indices();
        for (Eigen::Index j = qr.rank(); j < X.cols(); ++j) {
            if (!bad.empty()) bad += ", ";
            Eigen::Index col = perm(j);
            bad += col < static_cast<Eigen::Index>(names.size()) ? names[col]
                                                                 : ("col" + std::to_string(col));
        }
        throw NumericError("rank-deficient design; collinear columns: " + bad);
    }
    LsFit fit;
    fit.beta = qr.solve(yw);
    fit.residuals = y - X * fit.beta;
    Eigen::MatrixXd xtx = Xw.transpose() * Xw;
    fit.xtx_inv = xtx.ldlt().solve(Eigen::MatrixXd::Identity(X.cols(), X.cols()));
    return fit;
}

int count_clusters(const std::vector<int>& cluster) {
    return cluster.empty() ? 0 : *std::max_element(cluster.begin(), cluster.end()) + 1;
}

// CR1 sandwich: c (X'WX)^{-1} (sum_g s_g s_g') (X'WX)^{-1} with
// s_g = sum_{i in g} w_i x_i u_i and c = (G/(G-1)) ((N-1)/(N-K)).
Eigen::MatrixXd cluster_vcov(const Eigen::MatrixXd& X, const Eigen::VectorXd& u,
                             const Eigen::MatrixXd& xtx_inv, const std::vector<int>& cluster,
                             const Eigen::VectorXd& w) {
    const Eigen::Index n = X.rows(), k = X.cols();
    int G = count_clusters(cluster);
    Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(G, k);
    for (Eigen::Index i = 0; i < n; ++i) {
        double wi = w.size() == n ? w(i) : 1.0;
        scores.row(cluster[i]) += wi * u(i) * X.row(i);
    }
    Eigen::MatrixXd meat = scores.transpose() * scores;
    double gf = G > 1 ? static_cast<double>(G) / (G - 1) : 1.0;
    double nf = n > k ? static_cast<double>(n - 1) / static_cast<double>(n - k) : 1.0;
    return gf * nf * xtx_inv * meat * xtx_inv;
}

Eigen::MatrixXd hstack(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd out(std::max(a.rows(), b.rows()), a.cols() + b.cols());
    if (a.cols()) out.leftCols(a.cols()) = a;
    if (b.cols()) out.rightCols(b.cols()) = b;
    return out;
}

}  // namespace

std::optional<double> RegressionResult::coefficient(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return coef(static_cast<Eigen::Index>(i));
    return std::nullopt;
}

std::optional<double> RegressionResult::std_error(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return se(static_cast<Eigen::Index>(i));
    return std::nullopt;
}

RegressionResult ols(const RegressionSpec& spec, const Frame& frame) {
    if (!spec.endogenous.empty())
        throw ConfigError("ols() requires an empty endogenous set; use tsls()");
    RegressionData d = assemble(frame, spec);
    if (d.y.size() == 0) throw InsufficientDataError("regression '" + spec.name + "': no rows");

    Eigen::MatrixXd X = hstack(d.exog, d.instruments);  // instruments unused in ols specs
    std::vector<std::string> names = d.exog_names;
    names.insert(names.end(), d.instrument_names.begin(), d.instrument_names.end());

    Eigen::MatrixXd all = hstack(X, d.y);
    AbsorbResult ab = absorb_fixed_effects(all, d.fe, d.weights);
    X = all.leftCols(X.cols());
    Eigen::VectorXd y = all.col(all.cols() - 1);

    LsFit fit = least_squares(y, X, d.weights, names);
    Eigen::MatrixXd V = cluster_vcov(X, fit.residuals, fit.xtx_inv, d.cluster, d.weights);

    RegressionResult r;
    r.names = names;
    r.coef = fit.beta;
    r.se = V.diagonal().cwiseMax(0.0).cwiseSqrt();
    r.n_obs = y.size();
    r.n_clusters = count_clusters(d.cluster);
    r.demeaning_iterations = ab.iterations;
    r.rows_dropped_missing = d.rows_dropped_missing;
    r.singletons_dropped = d.singletons_dropped;
    return r;
}

WeakIvStats weak_iv_stats(const Eigen::VectorXd& endog, const Eigen::MatrixXd& instruments,
                          const Eigen::MatrixXd& exog, const std::vector<int>& cluster,
                          const Eigen::VectorXd& weights) {
    if (instruments.cols() == 0) throw ConfigError("weak_iv_stats: no instruments");
    Eigen::MatrixXd Z = hstack(instruments, exog);
    std::vector<std::string> names(Z.cols());
    for (Eigen::Index j = 0; j < Z.cols(); ++j) names[j] = "z" + std::to_string(j);
    if (Z.cols() >= Z.rows()) throw InsufficientDataError("weak_iv_stats: design wider than data");

    // Guard against a constant (post-demeaning, zero) instrument.
    for (Eigen::Index j = 0; j < instruments.cols(); ++j) {
        double v = (instruments.col(j).array() - instruments.col(j).mean()).matrix().squaredNorm();
        if (v <= 0.0) throw NumericError("weak_iv_stats: instrument has zero variance");
    }

    LsFit fs = least_squares(endog, Z, weights, names);
    const Eigen::Index q = instruments.cols();
    Eigen::VectorXd gamma = fs.beta.head(q);

    const Eigen::Index n = Z.rows(), k = Z.cols();
    double sigma2 = fs.residuals.squaredNorm() / static_cast<double>(n - k);
    if (weights.size() == n) {
        double wss = 0.0;
        for (Eigen::Index i = 0; i < n; ++i)
            wss += weights(i) * fs.residuals(i) * fs.residuals(i);
        sigma2 = wss / static_cast<double>(n - k);
    }
    Eigen::MatrixXd v_homo = sigma2 * fs.xtx_inv.topLeftCorner(q, q);
    Eigen::MatrixXd v_cr = cluster_vcov(Z, fs.residuals, fs.xtx_inv, cluster, weights)
                               .topLeftCorner(q, q);

    WeakIvStats s;
    s.cd_wald_f = gamma.dot(v_homo.ldlt().solve(gamma)) / static_cast<double>(q);
    s.kp_wald_f = gamma.dot(v_cr.ldlt().solve(gamma)) / static_cast<double>(q);
    return s;
}

RegressionResult tsls(const RegressionSpec& spec, const Frame& frame) {
    if (spec.endogenous.empty()) return ols(spec, frame);
    RegressionData d = assemble(frame, spec);
    if (d.y.size() == 0) throw InsufficientDataError("regression '" + spec.name + "': no rows");

    // Demean everything at once: y, endog, instruments, exog.
    Eigen::MatrixXd all = hstack(hstack(hstack(d.endog, d.instruments), d.exog), d.y);
    AbsorbResult ab = absorb_fixed_effects(all, d.fe, d.weights);
    const Eigen::Index p = d.endog.cols(), q = d.instruments.cols(), m = d.exog.cols();
    Eigen::MatrixXd endog = all.leftCols(p);
    Eigen::MatrixXd inst = all.middleCols(p, q);
    Eigen::MatrixXd exog = all.middleCols(p + q, m);
    Eigen::VectorXd y = all.col(all.cols() - 1);

    Eigen::MatrixXd Z = hstack(inst, exog);
    std::vector<std::string> znames = d.instrument_names;
    znames.insert(znames.end(), d.exog_names.begin(), d.exog_names.end());

    // First stage per endogenous column; fitted values replace the column.
    Eigen::MatrixXd fitted(endog.rows(), p);
    std::optional<FirstStage> first;
    for (Eigen::Index j = 0; j < p; ++j) {
        LsFit fs = least_squares(endog.col(j), Z, d.weights, znames);
        fitted.col(j) = endog.col(j) - fs.residuals;
        if (j == 0) {
            FirstStage f;
            f.names = znames;
            f.coef = fs.beta;
            Eigen::MatrixXd V = cluster_vcov(Z, fs.residuals, fs.xtx_inv, d.cluster, d.weights);
            f.se = V.diagonal().cwiseMax(0.0).cwiseSqrt();
            Eigen::VectorXd gamma = fs.beta.head(q);
            Eigen::MatrixXd v_ex = V.topLeftCorner(q, q);
            f.f_excluded = gamma.dot(v_ex.ldlt().solve(gamma)) / static_cast<double>(q);
            first = std::move(f);
        }
    }
    if (first && !(first->f_excluded > 1e-6))
        throw NumericError("degenerate instruments: first-stage F = " +
                           std::to_string(first ? first->f_excluded : 0.0));

    Eigen::MatrixXd Xhat = hstack(fitted, exog);
    Eigen::MatrixXd Xorig = hstack(endog, exog);
    std::vector<std::string> names = d.endog_names;
    names.insert(names.end(), d.exog_names.begin(), d.exog_names.end());

    LsFit second = least_squares(y, Xhat, d.weights, names);
    // Sandwich residuals at the ORIGINAL endogenous values.
    Eigen::VectorXd u = y - Xorig * second.beta;
    Eigen::MatrixXd V = cluster_vcov(Xhat, u, second.xtx_inv, d.cluster, d.weights);

    RegressionResult r;
    r.names = names;
    r.coef = second.beta;
    r.se = V.diagonal().cwiseMax(0.0).cwiseSqrt();
    r.n_obs = y.size();
    r.n_clusters = count_clusters(d.cluster);
    r.demeaning_iterations = ab.iterations;
    r.rows_dropped_missing = d.rows_dropped_missing;
    r.singletons_dropped = d.singletons_dropped;
    r.first_stage = first;
    if (p == 1) {
        WeakIvStats s = weak_iv_stats(endog.col(0), inst, exog, d.cluster, d.weights);
        r.cd_wald_f = s.cd_wald_f;
        r.kp_wald_f = s.kp_wald_f;
    }
    return r;
}

LogisticFit logistic_irls(const Eigen::VectorXd& y01, const Eigen::MatrixXd& X, double tol,
                          int max_iter) {
    const Eigen::Index n = X.rows(), k = X.cols();
    LogisticFit fit;
    fit.coef = Eigen::VectorXd::Zero(k);
    Eigen::VectorXd eta = Eigen::VectorXd::Zero(n);
    for (int it = 1; it <= max_iter; ++it) {
        Eigen::VectorXd p = (1.0 / (1.0 + (-eta.array()).exp())).matrix();
        Eigen::VectorXd wdiag = (p.array() * (1.0 - p.array())).matrix();
        // Working response: eta + (y - p) / w.
        Eigen::VectorXd z(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            double w = std::max(wdiag(i), 1e-10);
            z(i) = eta(i) + (y01(i) - p(i)) / w;
        }
        Eigen::MatrixXd XtWX = X.transpose() * wdiag.asDiagonal() * X;
        Eigen::VectorXd XtWz = X.transpose() * (wdiag.asDiagonal() * z);
        Eigen::VectorXd beta = XtWX.ldlt().solve(XtWz);
        double change = (beta - fit.coef).cwiseAbs().maxCoeff();
        fit.coef = beta;
        eta = X * beta;
        fit.iterations = it;
        if (eta.cwiseAbs().maxCoeff() > 30.0)
            throw NumericError(
                "logistic model separation: fitted probabilities at 0/1; reduce the controls");
        if (change < tol) {
            fit.converged = true;
            break;
        }
    }
    if (!fit.converged) throw NumericError("logistic IRLS did not converge");
    fit.fitted = (1.0 / (1.0 + (-eta.array()).exp())).matrix();
    return fit;
}

std::vector<std::optional<double>> ipw_weights(
    const std::vector<double>& non_superstar,
    const std::vector<std::vector<std::optional<double>>>& controls) {
    const std::size_t n = non_superstar.size();
    for (const auto& c : controls)
        if (c.size() != n) throw ConfigError("ipw_weights: control column length mismatch");

    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < n; ++i) {
        bool ok = true;
        for (const auto& c : controls)
            if (!c[i]) { ok = false; break; }
        if (ok) keep.push_back(i);
    }
    if (keep.size() < controls.size() + 2)
        throw InsufficientDataError("ipw_weights: too few complete rows");

    Eigen::MatrixXd X(keep.size(), controls.size() + 1);
    Eigen::VectorXd y(keep.size());
    for (std::size_t i = 0; i < keep.size(); ++i) {
        X(i, 0) = 1.0;
        for (std::size_t j = 0; j < controls.size(); ++j) X(i, j + 1) = *controls[j][keep[i]];
        y(i) = non_superstar[keep[i]];
    }
    LogisticFit fit = logistic_irls(y, X);

    std::vector<std::optional<double>> weights(n);
    std::vector<double> raw;
    for (std::size_t i = 0; i < keep.size(); ++i) {
        if (non_superstar[keep[i]] < 0.5) continue;  // superstar rows get no weight
        double p = fit.fitted(static_cast<Eigen::Index>(i));
        if (p <= 1e-12 || p >= 1.0 - 1e-12)
            throw NumericError("ipw_weights: separation (p-hat at 0/1); reduce the controls");
        double w = 1.0 / p;
        weights[keep[i]] = w;
        raw.push_back(w);
    }
    if (raw.empty()) return weights;
    std::sort(raw.begin(), raw.end());
    double cap = raw[static_cast<std::size_t>(std::min<double>(
        raw.size() - 1.0, std::floor(0.99 * (raw.size() - 1))))];
    for (auto& w : weights)
        if (w && *w > cap) w = cap;
    return weights;
}

}  // namespace superspill
