#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "superspill.h"

namespace fs = std::filesystem;

namespace {

ss_model_params default_params() {
    ss_model_params p{};
    p.rho = 0.6;
    p.theta = 1.0;
    p.w = 1.0;
    p.f = 0.1;
    p.f_e = 0.5;
    p.delta = 0.1;
    p.alpha = 0.01;
    p.tau = 0.0;
    p.psi = 0.0;
    p.c = 1.0;
    p.dist_kind = 0;  // lognormal
    p.dist_a = 0.0;
    p.dist_b = 1.0;
    return p;
}

}  // namespace

TEST_CASE("C API: model evaluators") {
    ss_model_params p = default_params();

    double profit = 0.0;
    REQUIRE(ss_model_profit(&p, 1.5, 20.0, 0.0, 0.0, &profit) == SS_OK);
    CHECK(std::isfinite(profit));

    double cutoff = 0.0;
    REQUIRE(ss_model_cutoff(&p, 20.0, 0.0, 0.0, &cutoff) == SS_OK);
    CHECK(cutoff > 0.0);
    double at_cutoff = 0.0;
    REQUIRE(ss_model_profit(&p, cutoff, 20.0, 0.0, 0.0, &at_cutoff) == SS_OK);
    CHECK(std::abs(at_cutoff) < 1e-10);

    double expected = 0.0;
    REQUIRE(ss_model_expected_log_productivity(&p, 20.0, 0.0, 0.0, &expected) == SS_OK);
    CHECK(std::isfinite(expected));

    double direct = 0, indirect = 0, total = 0;
    REQUIRE(ss_model_marginal_effect(&p, 20.0, 0.0, 0.0, SS_CHANNEL_H, &direct, &indirect,
                                     &total) == SS_OK);
    CHECK(direct == doctest::Approx(0.01));
    CHECK(indirect < 0.0);
    CHECK(total == doctest::Approx(direct + indirect));

    SUBCASE("domain errors map to status codes") {
        double out = 0.0;
        CHECK(ss_model_profit(&p, -1.0, 0, 0, 0, &out) == SS_ERR_DOMAIN);
        CHECK(std::strlen(ss_last_error()) > 0);

        ss_model_params bad = p;
        bad.rho = 1.5;
        CHECK(ss_model_profit(&bad, 1.0, 0, 0, 0, &out) == SS_ERR_CONFIG);
    }
}

TEST_CASE("C API: panel handles") {
    fs::path dir = fs::temp_directory_path() / "superspill_capi_panel";
    fs::remove_all(dir);
    fs::create_directories(dir);

    fs::path csv = dir / "panel.csv";
    {
        std::ofstream out(csv);
        out << "firm_id,year,sector3,sector2,province,island,output,value_added,capital,"
               "materials,energy,workers_production,workers_nonproduction,wage_bill,"
               "foreign_share,export_flag,imported_materials\n";
        out << "F1,2001,101,10,P1,I1,100,50,30,20,4,8,2,12,0.0,0,5\n";
        out << "F2,2001,101,10,P1,I1,90,45,25,18,3,6,1,10,0.1,1,2\n";
    }

    ss_panel* panel = nullptr;
    REQUIRE(ss_panel_load(csv.string().c_str(), &panel) == SS_OK);
    REQUIRE(panel != nullptr);
    CHECK(ss_panel_rows(panel) == 2);

    fs::path copy = dir / "copy.csv";
    CHECK(ss_panel_write(panel, copy.string().c_str()) == SS_OK);
    CHECK(fs::exists(copy));
    ss_panel_free(panel);

    SUBCASE("missing file maps to an IO status") {
        ss_panel* p2 = nullptr;
        CHECK(ss_panel_load((dir / "nope.csv").string().c_str(), &p2) == SS_ERR_IO);
        CHECK(p2 == nullptr);
    }

    fs::remove_all(dir);
}

TEST_CASE("C API: manifest context drives the pipeline") {
    fs::path dir = fs::temp_directory_path() / "superspill_capi_ctx";
    fs::remove_all(dir);
    fs::create_directories(dir);

    std::string json = R"({
      "seed": 77,
      "output_dir": ")" + dir.string() + R"(",
      "stages": {"simulate": true, "classify": true, "tfp": true,
                  "spillovers": true, "decompose": true},
      "superstar": {"min_tenure_years": 3},
      "windows": [{"t1": 2001, "t2": 2005}],
      "simulate": {"n_firms_initial": 400, "n_years": 5, "n_sectors": 4,
                    "n_provinces": 5,
                    "model": {"delta": 0.05}}
    })";

    ss_context* ctx = ss_context_open_json(json.c_str());
    REQUIRE(ctx != nullptr);
    REQUIRE_MESSAGE(ss_context_status(ctx) == SS_OK, ss_context_error(ctx));
    CHECK(ss_context_validate(ctx) == SS_OK);
    REQUIRE_MESSAGE(ss_context_run_pipeline(ctx, nullptr) == SS_OK, ss_context_error(ctx));
    CHECK(ss_context_failed_stage(ctx) == -1);
    CHECK(std::string(ss_context_run_log(ctx)).find("simulate,ok") != std::string::npos);
    CHECK(fs::exists(dir / "decomposition.csv"));
    ss_context_close(ctx);

    SUBCASE("stage names map to stable indices") {
        CHECK(ss_context_stage_index("simulate") == 0);
        CHECK(ss_context_stage_index("decompose") == 8);
        CHECK(ss_context_stage_index("bogus") == -1);
    }

    SUBCASE("invalid manifests surface through the context") {
        ss_context* bad = ss_context_open_json("{\"threads\": 0}");
        REQUIRE(bad != nullptr);
        CHECK(ss_context_status(bad) == SS_ERR_CONFIG);
        CHECK(std::string(ss_context_error(bad)).find("threads") != std::string::npos);
        ss_context_close(bad);
    }

    fs::remove_all(dir);
}
