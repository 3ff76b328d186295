#include "core/decomposition.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "core/errors.hpp"

namespace superspill {

void WindowSpec::validate() const {
    if (!(t1 < t2)) throw ConfigError("window: t1 must be < t2");
}

namespace {

struct UniverseRow {
    const FirmYear* row;
    double share = 0.0;  // within the decomposition universe
};

// Rows usable at `year`: phi and output present. Shares normalized within.
std::vector<UniverseRow> universe_at(const Panel& panel, int year,
                                     const std::map<std::string, std::string>* groups,
                                     const std::string& group, std::size_t* excluded) {
    std::vector<UniverseRow> rows;
    double total = 0.0;
    for (const FirmYear& r : panel.rows()) {
        if (r.year != year) continue;
        bool in_group = true;
        if (groups) {
            auto it = groups->find(r.firm_id);
            std::string label = it == groups->end() ? std::string() : it->second;
            in_group = label == group;
        }
        if (!in_group) continue;
        if (!r.phi || !r.output) {
            if (excluded) ++(*excluded);
            continue;
        }
        rows.push_back(UniverseRow{&r, *r.output});
        total += *r.output;
    }
    if (rows.empty()) return rows;
    if (total <= 0.0)
        throw Error("decomposition universe at year " + std::to_string(year) +
                    " has zero aggregate output");
    for (auto& u : rows) u.share /= total;
    return rows;
}

// mean + cov on within-subset renormalized shares; share is the subset's
// share of the parent universe.
OpMoments moments_of(const std::vector<const UniverseRow*>& subset) {
    OpMoments m;
    m.n_firms = subset.size();
    if (subset.empty()) {
        m.share = 0.0;
        return m;
    }
    double share_sum = 0.0, phi_sum = 0.0;
    for (const auto* u : subset) {
        share_sum += u->share;
        phi_sum += *u->row->phi;
    }
    m.share = share_sum;
    m.mean = phi_sum / static_cast<double>(subset.size());
    double mean_share = share_sum > 0.0
                            ? 1.0 / static_cast<double>(subset.size())
                            : 0.0;
    double cov = 0.0;
    for (const auto* u : subset) {
        double within_share = share_sum > 0.0 ? u->share / share_sum : 0.0;
        cov += (within_share - mean_share) * (*u->row->phi - m.mean);
    }
    m.covariance = cov;
    m.aggregate = m.mean + m.covariance;
    return m;
}

std::set<std::string> group_labels(const std::map<std::string, std::string>& groups) {
    std::set<std::string> labels;
    for (const auto& [_, g] : groups) labels.insert(g);
    return labels;
}

}  // namespace

StaticOpResult op_static(const Panel& panel, int year,
                         const std::map<std::string, std::string>& groups) {
    StaticOpResult out;
    auto rows = universe_at(panel, year, nullptr, "", &out.excluded_rows);
    if (rows.empty()) throw Error("no usable rows at year " + std::to_string(year));

    std::vector<const UniverseRow*> all;
    all.reserve(rows.size());
    for (const auto& u : rows) all.push_back(&u);
    out.overall = moments_of(all);
    out.per_group[""] = out.overall;

    if (!groups.empty()) {
        for (const std::string& label : group_labels(groups)) {
            std::vector<const UniverseRow*> subset;
            for (const auto& u : rows) {
                auto it = groups.find(u.row->firm_id);
                if (it != groups.end() && it->second == label) subset.push_back(&u);
            }
            if (subset.empty()) continue;  // empty group omitted
            out.per_group[label] = moments_of(subset);
        }
    }
    return out;
}

std::map<std::string, Transition> classify_transitions(const Panel& panel,
                                                       const WindowSpec& window) {
    window.validate();
    // Presence per firm-year (any row counts; usability is a universe concern).
    std::set<std::pair<std::string, int>> present;
    std::set<std::string> firms;
    std::set<int> panel_years;
    for (const FirmYear& r : panel.rows()) {
        present.insert({r.firm_id, r.year});
        firms.insert(r.firm_id);
        panel_years.insert(r.year);
    }
    auto is_present = [&present](const std::string& f, int y) {
        return present.count({f, y}) > 0;
    };

    std::map<std::string, Transition> out;
    for (const std::string& f : firms) {
        bool at1 = is_present(f, window.t1);
        bool at2 = is_present(f, window.t2);
        bool survivor = at1 && at2;
        if (survivor && window.continuity_required) {
            for (int y : panel_years) {
                if (y <= window.t1 || y >= window.t2) continue;
                if (!is_present(f, y)) {
                    survivor = false;
                    break;
                }
            }
        }
        if (survivor) out[f] = Transition::Survivor;
        else if (at1) out[f] = Transition::Exiter;  // includes gap firms present at t2
        else if (at2) out[f] = Transition::Entrant;
        else out[f] = Transition::Other;
    }
    return out;
}

namespace {

std::optional<GroupDecomp> decompose_universe(const Panel& panel, const WindowSpec& window,
                                              const std::map<std::string, std::string>* groups,
                                              const std::string& label,
                                              const std::set<std::string>& survivors,
                                              std::size_t* excluded) {
    auto u1 = universe_at(panel, window.t1, groups, label, excluded);
    auto u2 = universe_at(panel, window.t2, groups, label, excluded);
    if (u1.empty() || u2.empty()) return std::nullopt;  // group absent at an endpoint

    auto split = [&survivors](const std::vector<UniverseRow>& rows, bool want_survivor) {
        std::vector<const UniverseRow*> out;
        for (const auto& u : rows)
            if ((survivors.count(u.row->firm_id) > 0) == want_survivor) out.push_back(&u);
        return out;
    };

    OpMoments sur1 = moments_of(split(u1, true));
    OpMoments ex1 = moments_of(split(u1, false));
    OpMoments sur2 = moments_of(split(u2, true));
    OpMoments en2 = moments_of(split(u2, false));

    GroupDecomp g;
    g.group = label;
    g.share_t1 = sur1.share;
    g.share_t2 = sur2.share;
    g.n_survivors = sur1.n_firms;
    g.n_exiters = ex1.n_firms;
    g.n_entrants = en2.n_firms;

    g.terms.plant_improvement = sur2.mean - sur1.mean;
    g.terms.within_reallocation = sur2.covariance - sur1.covariance;
    if (en2.n_firms > 0) {
        g.terms.entrant_plant = en2.share * (en2.mean - sur2.mean);
        g.terms.entrant_realloc = en2.share * (en2.covariance - sur2.covariance);
    }
    if (ex1.n_firms > 0) {
        g.terms.exiter_plant = ex1.share * (sur1.mean - ex1.mean);
        g.terms.exiter_realloc = ex1.share * (sur1.covariance - ex1.covariance);
    }

    // Direct aggregate at each endpoint: share-weighted productivity.
    auto direct = [](const std::vector<UniverseRow>& rows) {
        double phi = 0.0;
        for (const auto& u : rows) phi += u.share * (*u.row->phi);
        return phi;
    };
    g.aggregate_change = direct(u2) - direct(u1);
    return g;
}

}  // namespace

DecompResult mp_dynamic(const Panel& panel, const WindowSpec& window,
                        const std::map<std::string, std::string>& groups) {
    window.validate();
    auto labels = classify_transitions(panel, window);
    std::set<std::string> survivors;
    for (const auto& [f, t] : labels)
        if (t == Transition::Survivor) survivors.insert(f);

    DecompResult out;
    out.t1 = window.t1;
    out.t2 = window.t2;
    auto overall = decompose_universe(panel, window, nullptr, "", survivors, &out.excluded_rows);
    if (!overall)
        throw Error("no usable rows at a window endpoint (" + std::to_string(window.t1) + ", " +
                    std::to_string(window.t2) + ")");
    out.overall = *overall;
    out.residual_check = std::abs(out.overall.terms.total() - out.overall.aggregate_change);

    for (const std::string& label : group_labels(groups)) {
        auto g = decompose_universe(panel, window, &groups, label, survivors, &out.excluded_rows);
        if (!g) continue;  // group absent at an endpoint: omitted
        out.residual_check =
            std::max(out.residual_check, std::abs(g->terms.total() - g->aggregate_change));
        out.per_group.push_back(std::move(*g));
    }
    return out;
}

std::vector<StaticChange> op_static_change(const Panel& panel, const WindowSpec& window,
                                           const std::map<std::string, std::string>& groups) {
    window.validate();
    StaticOpResult a = op_static(panel, window.t1, groups);
    StaticOpResult b = op_static(panel, window.t2, groups);
    std::vector<StaticChange> out;
    for (const auto& [label, m2] : b.per_group) {
        auto it = a.per_group.find(label);
        if (it == a.per_group.end()) continue;
        StaticChange c;
        c.group = label;
        c.plant_improvement = m2.mean - it->second.mean;
        c.reallocation = m2.covariance - it->second.covariance;
        c.aggregate_change = m2.aggregate - it->second.aggregate;
        out.push_back(std::move(c));
    }
    return out;
}

}  // namespace superspill
