#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "cvl/pipeline.hpp"

using namespace cvl;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() /
               ("cvl_pipe_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

ExperimentConfig micro_config(int runs = 6, uint64_t seed = 500) {
    // desk-scale stand-in: 10 bins spanning 20 MHz so the group delay is
    // resolvable, two odd-multiple tones, 1 ms windows
    ExperimentConfig c;
    c.name = "micro";
    c.synth.layout = {10, 2e6, 1.8e6, 2e6, 1};
    c.synth.profile = SqueezeProfile::flat(c.synth.layout, SqueezeProfile::r_from_epr(0.5));
    DriveSpec d;
    d.tones = {{2e6, 30.0 * M_PI / 520.0, 0.0}, {6e6, 30.0 * M_PI / 520.0, 0.0}};
    c.synth.drive = d;
    c.synth.delay_s = 10.4e-9;
    c.synth.elec_noise_db = -6.0;
    c.synth.sample_dt_s = 1e-8;
    c.synth.samples = 100000;
    c.synth.digitizer_bits = 12;
    c.synth.fullscale = 8.0;
    c.synth.seed = seed;
    c.runs = runs;
    c.analysis.normalization = NormalizeMode::ElecSubtract;
    return c;
}

std::vector<char> slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return std::vector<char>(std::istreambuf_iterator<char>(is), {});
}

}  // namespace

TEST_CASE("simulate writes the manifest census") {
    TempDir tmp("census");
    auto cfg = micro_config(2);
    auto manifest = simulate(cfg, tmp.path);
    // per run: XX/PP/XP on + XX/PP off + shot + elec
    int on = 0, off = 0, shot = 0, elec = 0;
    for (const auto& e : manifest.files) {
        CHECK(fs::exists(tmp.path / e.path));
        switch (e.kind) {
            case TraceKind::Signal: ++on; break;
            case TraceKind::SignalOff: ++off; break;
            case TraceKind::Shot: ++shot; break;
            case TraceKind::Elec: ++elec; break;
        }
    }
    CHECK(on == 6);
    CHECK(off == 4);
    CHECK(shot == 2);
    CHECK(elec == 2);
    CHECK(fs::exists(tmp.path / "manifest.json"));
    CHECK(fs::exists(tmp.path / "config.json"));

    auto back = read_manifest(tmp.path / "manifest.json");
    CHECK(back.files.size() == manifest.files.size());
    CHECK(back.config.synth.seed == cfg.synth.seed);

    SUBCASE("zero runs still produce the reference traces") {
        TempDir tmp0("zero");
        auto m0 = simulate(micro_config(0), tmp0.path);
        int n_signal = 0, n_ref = 0;
        for (const auto& e : m0.files)
            (e.kind == TraceKind::Signal || e.kind == TraceKind::SignalOff ? n_signal : n_ref)++;
        CHECK(n_signal == 0);
        CHECK(n_ref == 2);
    }
}

TEST_CASE("end-to-end analysis recovers the injected physics") {
    TempDir tmp("analyze");
    auto cfg = micro_config(8);
    auto manifest = simulate(cfg, tmp.path);
    auto res = analyze(manifest, tmp.path);

    SUBCASE("the conjugate delay is recovered") {
        REQUIRE(res.delay_estimate_s.has_value());
        CHECK(std::abs(*res.delay_estimate_s - 10.4e-9) < 0.5e-9);
    }

    SUBCASE("normalized covariance approaches the analytic one away from edges") {
        auto theory_sig = shot_normalize(
            theory_covariance(cfg.synth.layout, cfg.synth.profile, cfg.synth.drive));
        const ModeLayout& l = cfg.synth.layout;
        QuadIndex qt(l);
        int m = l.mode_count;
        // compare the EPR-relevant sectors on fold-free interior modes
        double worst = 0;
        for (int i = 3; i < 7; ++i) {
            for (int j = 3; j < 7; ++j) {
                int bi = l.interior_begin() + i, bj = l.interior_begin() + j;
                worst = std::max(worst, std::abs(res.normalized.sigma(i, m + j) -
                                                 theory_sig.m(qt.xp(bi), qt.xc(bj))));
                worst = std::max(worst, std::abs(res.normalized.sigma(i, 3 * m + j) -
                                                 theory_sig.m(qt.xp(bi), qt.pc(bj))));
                worst = std::max(worst, std::abs(res.normalized.sigma(2 * m + i, 3 * m + j) -
                                                 theory_sig.m(qt.pp(bi), qt.pc(bj))));
            }
        }
        // statistical scale: 4 / sqrt(runs x coefficients-per-bin)
        CHECK(worst < 4.0 / std::sqrt(8.0 * 1801.0));
    }

    SUBCASE("nullifier report recovers the squeezing on clean interior modes") {
        REQUIRE(res.report_matrix.entries.size() == 10);
        for (const auto& e : res.report_matrix.entries) {
            if (e.edge) continue;
            CHECK(e.null_x_db == doctest::Approx(-3.01).epsilon(0.2));
            CHECK(e.null_p_db == doctest::Approx(-3.01).epsilon(0.2));
            CHECK(e.epr_x_db > e.null_x_db);  // modulation degrades the raw EPR
        }
    }

    SUBCASE("lock-in report matches the matrix report at compensated phase") {
        REQUIRE(!res.report_lockin.entries.empty());
        for (size_t i = 0; i < res.report_matrix.entries.size(); ++i) {
            if (res.report_matrix.entries[i].edge) continue;
            CHECK(res.report_lockin.entries[i].null_x_db ==
                  doctest::Approx(res.report_matrix.entries[i].null_x_db).epsilon(0.05));
        }
        CHECK(!res.phase_table.empty());
    }

    SUBCASE("four-curve table is written with off spectra") {
        CHECK(res.four_curve.has_off);
        CHECK(res.four_curve.has_lockin);
        for (size_t i = 3; i < 7; ++i)
            CHECK(res.four_curve.epr_off_x_db[i] == doctest::Approx(-3.01).epsilon(0.25));
        TempDir out("write");
        write_analysis(res, cfg, out.path);
        CHECK(fs::exists(out.path / "covariance.cvl1"));
        CHECK(fs::exists(out.path / "nullifiers_matrix.csv"));
        CHECK(fs::exists(out.path / "nullifiers_lockin.csv"));
        CHECK(fs::exists(out.path / "spectra.csv"));
        CHECK(fs::exists(out.path / "lockin_phases.csv"));
    }
}

TEST_CASE("reproducibility: identical config and seed give identical bytes") {
    TempDir a("repro_a"), b("repro_b");
    auto cfg = micro_config(2, 777);
    simulate(cfg, a.path);
    simulate(cfg, b.path);
    for (const auto& entry : fs::directory_iterator(a.path)) {
        auto name = entry.path().filename();
        CAPTURE(name.string());
        CHECK(slurp(entry.path()) == slurp(b.path / name));
    }
    // analysis outputs are byte-identical too
    TempDir oa("out_a"), ob("out_b");
    auto ma = read_manifest(a.path / "manifest.json");
    auto mb = read_manifest(b.path / "manifest.json");
    write_analysis(analyze(ma, a.path), cfg, oa.path);
    write_analysis(analyze(mb, b.path), cfg, ob.path);
    for (const auto& entry : fs::directory_iterator(oa.path)) {
        auto name = entry.path().filename();
        CAPTURE(name.string());
        CHECK(slurp(entry.path()) == slurp(ob.path / name));
    }
}

TEST_CASE("shot-only manifest analyzes to 0 dB") {
    TempDir tmp("shotonly");
    auto cfg = micro_config(0);
    auto manifest = simulate(cfg, tmp.path);
    auto res = analyze(manifest, tmp.path);
    for (const auto& e : res.report_matrix.entries) {
        if (e.edge) continue;
        CHECK(std::abs(e.epr_x_db) < 1.0);
        CHECK(std::abs(e.null_p_db) < 1.0);
    }
}

TEST_CASE("missing sectors are reported by name") {
    TempDir tmp("missing");
    auto cfg = micro_config(2);
    auto manifest = simulate(cfg, tmp.path);
    Manifest broken = manifest;
    broken.files.erase(std::remove_if(broken.files.begin(), broken.files.end(),
                                      [](const ManifestEntry& e) {
                                          return e.kind == TraceKind::Signal &&
                                                 e.quad == QuadConfig::XP;
                                      }),
                       broken.files.end());
    try {
        analyze(broken, tmp.path);
        FAIL("expected a missing-sector error");
    } catch (const std::exception& e) {
        CHECK(std::string(e.what()).find("XP") != std::string::npos);
    }
}

TEST_CASE("verify on analytic and vacuum covariances") {
    auto cfg = micro_config();
    auto t = theory(cfg);

    SUBCASE("analytic state passes with zero extraneous edges") {
        auto rep = verify(t.sigma_normalized, cfg, 0.05);
        CHECK(rep.pass);
        CHECK(rep.extraneous.empty());
        CHECK(rep.missing.empty());
    }

    SUBCASE("vacuum fails with everything missing") {
        auto vac = shot_normalize(vacuum_covariance(cfg.synth.layout));
        auto rep = verify(vac, cfg, 0.05);
        CHECK(!rep.pass);
        CHECK(rep.matched.empty());
        CHECK(!rep.missing.empty());
        auto json_text = structure_report_json(rep);
        CHECK(json_text.find("\"pass\": false") != std::string::npos);
    }

    SUBCASE("theory outputs are written") {
        TempDir out("theory");
        write_theory(t, cfg, out.path);
        CHECK(fs::exists(out.path / "theory_covariance.cvl1"));
        CHECK(fs::exists(out.path / "graph_expected.json"));
        CHECK(fs::exists(out.path / "error_vector.csv"));
        auto raw = slurp(out.path / "graph_expected.json");
        auto g = graph_from_json(std::string(raw.begin(), raw.end()));
        CHECK(g.nodes.size() == 10);
    }
}

TEST_CASE("statistical closure tightens with more runs") {
    auto max_err = [&](int runs, uint64_t seed) {
        TempDir tmp("closure" + std::to_string(runs));
        auto cfg = micro_config(runs, seed);
        cfg.include_eom_off = false;
        auto manifest = simulate(cfg, tmp.path);
        auto res = analyze(manifest, tmp.path);
        auto theory_sig = shot_normalize(
            theory_covariance(cfg.synth.layout, cfg.synth.profile, cfg.synth.drive));
        const ModeLayout& l = cfg.synth.layout;
        QuadIndex qt(l);
        int m = l.mode_count;
        double worst = 0;
        for (int i = 4; i < 7; ++i)
            for (int j = 4; j < 7; ++j) {
                int bi = l.interior_begin() + i, bj = l.interior_begin() + j;
                worst = std::max(worst, std::abs(res.normalized.sigma(i, m + j) -
                                                 theory_sig.m(qt.xp(bi), qt.xc(bj))));
            }
        return worst;
    };
    double e4 = max_err(4, 900);
    double e16 = max_err(16, 901);
    CHECK(e16 < e4);
    CHECK(e16 < 2.0 / std::sqrt(16.0 * 1801.0));
}
