#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "core/types.hpp"

namespace superspill {

struct WindowSpec {
    int t1 = 0;
    int t2 = 0;
    bool continuity_required = true;

    void validate() const;  // t1 < t2
};

// One decomposition universe at one year: output shares within the universe
// (sum 1), unweighted mean, share-productivity covariance, and the
// share-weighted aggregate = mean + cov.
struct OpMoments {
    double share = 1.0;  // universe share of the parent universe
    double mean = 0.0;
    double covariance = 0.0;
    double aggregate = 0.0;
    std::size_t n_firms = 0;
};

// Static Olley-Pakes at one year. Group labels map firm_id -> group name;
// ungrouped callers pass an empty map and read the "" entry. Firms with
// missing phi or output are excluded and counted.
struct StaticOpResult {
    std::map<std::string, OpMoments> per_group;  // "" = whole universe
    OpMoments overall;
    std::size_t excluded_rows = 0;
};

StaticOpResult op_static(const Panel& panel, int year,
                         const std::map<std::string, std::string>& groups = {});

enum class Transition { Survivor, Exiter, Entrant, Other };

// Firm-level labels for a window. A firm present at both endpoints but
// failing the continuity rule is an Exiter (it left the market in between);
// mp_dynamic partitions each endpoint universe separately so the share
// identities hold regardless.
std::map<std::string, Transition> classify_transitions(const Panel& panel,
                                                       const WindowSpec& window);

struct MpTerms {
    double plant_improvement = 0.0;    // survivor mean change
    double within_reallocation = 0.0;  // survivor covariance change
    double entrant_plant = 0.0;        // Sh_En2 (mean_En2 - mean_Sur2)
    double entrant_realloc = 0.0;      // Sh_En2 (cov_En2  - cov_Sur2)
    double exiter_plant = 0.0;         // Sh_Ex1 (mean_Sur1 - mean_Ex1)
    double exiter_realloc = 0.0;       // Sh_Ex1 (cov_Sur1  - cov_Ex1)

    double between_reallocation() const {
        return entrant_plant + entrant_realloc + exiter_plant + exiter_realloc;
    }
    double total() const {
        return plant_improvement + within_reallocation + between_reallocation();
    }
};

struct GroupDecomp {
    std::string group;
    double aggregate_change = 0.0;  // Phi_t2 - Phi_t1 inside the group universe
    double share_t1 = 0.0;          // survivor share at t1 (1 - exiter share)
    double share_t2 = 0.0;          // survivor share at t2 (1 - entrant share)
    MpTerms terms;
    std::size_t n_survivors = 0, n_exiters = 0, n_entrants = 0;
};

struct DecompResult {
    int t1 = 0, t2 = 0;
    GroupDecomp overall;
    std::vector<GroupDecomp> per_group;
    double residual_check = 0.0;  // max |terms.total() - aggregate_change|
    std::size_t excluded_rows = 0;
};

// Dynamic Olley-Pakes (Melitz-Polanec) decomposition over a window. When
// `groups` is given the decomposition also runs inside each group universe
// with shares renormalized to that universe.
DecompResult mp_dynamic(const Panel& panel, const WindowSpec& window,
                        const std::map<std::string, std::string>& groups = {});

// Static-OP change table rows: aggregate change, mean change and covariance
// change per group universe between t1 and t2.
struct StaticChange {
    std::string group;
    double aggregate_change = 0.0;
    double plant_improvement = 0.0;
    double reallocation = 0.0;
};

std::vector<StaticChange> op_static_change(const Panel& panel, const WindowSpec& window,
                                           const std::map<std::string, std::string>& groups = {});

}  // namespace superspill
