#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace superspill {

// Declarative regression request. Columns are resolved against a Frame by the
// caller; sample filtering happens upstream.
struct RegressionSpec {
    std::string name;
    std::string dependent;
    std::vector<std::string> endogenous;
    std::vector<std::string> instruments;
    std::vector<std::string> exogenous;
    std::vector<std::string> fe_dims;
    std::string cluster;
    std::optional<std::string> weights;
    bool interact_fe = false;  // concatenate FE dims into one interacted cell

    void validate() const;  // role disjointness, instrument count
};

// Column store feeding the regression kernel: numeric columns may have holes,
// key columns are categorical (FE dims, cluster ids).
struct Frame {
    std::size_t n_rows = 0;
    std::map<std::string, std::vector<std::optional<double>>> numeric;
    std::map<std::string, std::vector<std::string>> keys;

    void add_numeric(const std::string& name, std::vector<std::optional<double>> col);
    void add_key(const std::string& name, std::vector<std::string> col);
};

// Dense, complete-case design ready for the kernel.
struct RegressionData {
    Eigen::VectorXd y;
    Eigen::MatrixXd endog;        // n x p (p may be 0)
    Eigen::MatrixXd instruments;  // n x q
    Eigen::MatrixXd exog;         // n x m
    std::vector<std::string> endog_names, instrument_names, exog_names;
    std::vector<std::vector<int>> fe;  // contiguous group ids per FE dimension
    std::vector<int> cluster;
    Eigen::VectorXd weights;  // size 0 = unweighted
    std::size_t rows_dropped_missing = 0;
    std::size_t singletons_dropped = 0;
};

// Complete-case assembly; drops rows with any hole in a used column and then
// iteratively removes singleton FE groups.
RegressionData assemble(const Frame& frame, const RegressionSpec& spec);

struct AbsorbResult {
    int iterations = 0;
};

// Iterated within-group demeaning (alternating projections) across FE
// dimensions applied to every column of `columns`, until the largest absolute
// change in one sweep is below tol. Weighted means when weights has size.
// Throws NumericError after 10000 sweeps.
AbsorbResult absorb_fixed_effects(Eigen::MatrixXd& columns,
                                  const std::vector<std::vector<int>>& fe,
                                  const Eigen::VectorXd& weights, double tol = 1e-8);

struct FirstStage {
    std::vector<std::string> names;
    Eigen::VectorXd coef;
    Eigen::VectorXd se;  // cluster-robust
    double f_excluded = 0.0;  // cluster-robust Wald F on excluded instruments
};

struct RegressionResult {
    std::vector<std::string> names;
    Eigen::VectorXd coef;
    Eigen::VectorXd se;  // CR1 cluster-robust
    long n_obs = 0;
    long n_clusters = 0;
    int demeaning_iterations = 0;
    std::size_t rows_dropped_missing = 0;
    std::size_t singletons_dropped = 0;
    std::optional<FirstStage> first_stage;
    std::optional<double> kp_wald_f;
    std::optional<double> cd_wald_f;

    std::optional<double> coefficient(const std::string& name) const;
    std::optional<double> std_error(const std::string& name) const;
};

// Least squares with CR1 cluster-robust covariance,
// c = (G/(G-1)) ((N-1)/(N-K)). Throws NumericError on rank deficiency,
// naming the collinear columns.
RegressionResult ols(const RegressionSpec& spec, const Frame& frame);

// 2SLS: absorb FE from every column, first stage per endogenous column on
// [instruments, exog], second stage on fitted values; the sandwich uses
// residuals at the ORIGINAL endogenous values. Reduces to ols() when the
// endogenous set is empty. Single-endogenous requests also carry the
// Cragg-Donald (homoskedastic) and Kleibergen-Paap (cluster-robust)
// first-stage Wald F statistics.
RegressionResult tsls(const RegressionSpec& spec, const Frame& frame);

struct WeakIvStats {
    double cd_wald_f = 0.0;
    double kp_wald_f = 0.0;
};

// Single-endogenous first-stage strength statistics on demeaned data.
WeakIvStats weak_iv_stats(const Eigen::VectorXd& endog, const Eigen::MatrixXd& instruments,
                          const Eigen::MatrixXd& exog, const std::vector<int>& cluster,
                          const Eigen::VectorXd& weights = {});

struct LogisticFit {
    Eigen::VectorXd coef;
    Eigen::VectorXd fitted;  // probabilities
    int iterations = 0;
    bool converged = false;
};

// Logistic MLE by iteratively reweighted least squares, tolerance 1e-8 on the
// max coefficient change. Throws NumericError on (quasi-)separation.
LogisticFit logistic_irls(const Eigen::VectorXd& y01, const Eigen::MatrixXd& X,
                          double tol = 1e-8, int max_iter = 200);

// Inverse-probability weights for selection into the non-superstar sample:
// fit P(non-superstar | controls) with an intercept, weight retained
// non-superstar rows by 1/p-hat, winsorize at the 99th percentile. Rows with
// missing controls or superstar rows get no weight.
std::vector<std::optional<double>> ipw_weights(
    const std::vector<double>& non_superstar,  // 0/1 per row
    const std::vector<std::vector<std::optional<double>>>& controls);

}  // namespace superspill
