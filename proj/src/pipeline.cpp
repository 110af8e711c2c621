#include "cvl/pipeline.hpp"

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "cvl/fft.hpp"
#include "cvl/rng.hpp"
#include "json.hpp"

namespace cvl {

namespace fs = std::filesystem;
using nlohmann::json;

int worker_count(int runs) {
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw <= 0) hw = 1;
    if (const char* env = std::getenv("CVL_THREADS")) {
        int cap = std::atoi(env);
        if (cap >= 1) hw = std::min(hw, cap);
    }
    return std::max(1, std::min(hw, runs));
}

namespace {

void parallel_for(int count, int workers, const std::function<void(int)>& fn) {
    if (workers <= 1 || count <= 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr error;
    std::mutex error_mutex;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

struct TraceJob {
    TraceKind kind;
    QuadConfig quad;
    int run;
};

uint64_t job_seed(uint64_t master, const TraceJob& job) {
    return GaussianStream::derive(master, static_cast<uint64_t>(job.run) + 1,
                                  (static_cast<uint64_t>(job.kind) << 8) |
                                      static_cast<uint64_t>(job.quad));
}

std::string job_filename(const TraceJob& job) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "run%03d_%s_%s.cvlt", job.run, to_string(job.kind).c_str(),
                  to_string(job.quad).c_str());
    return buf;
}

}  // namespace

void write_manifest(const fs::path& path, const Manifest& m) {
    json j;
    j["config"] = json::parse(experiment_config_to_json(m.config));
    j["files"] = json::array();
    for (const auto& e : m.files)
        j["files"].push_back({{"path", e.path},
                              {"kind", to_string(e.kind)},
                              {"quad", to_string(e.quad)},
                              {"run", e.run},
                              {"seed", e.seed}});
    std::ofstream os(path);
    require(os.good(), "cannot write manifest: " + path.string());
    os << j.dump(2) << "\n";
}

Manifest read_manifest(const fs::path& path) {
    std::ifstream is(path);
    require(is.good(), "cannot read manifest: " + path.string());
    std::stringstream ss;
    ss << is.rdbuf();
    json j = json::parse(ss.str());
    Manifest m;
    m.config = experiment_config_from_json(j.at("config").dump());
    for (const auto& f : j.at("files")) {
        ManifestEntry e;
        e.path = f.at("path").get<std::string>();
        e.kind = kind_from_string(f.at("kind").get<std::string>());
        e.quad = quad_from_string(f.at("quad").get<std::string>());
        e.run = f.at("run").get<int>();
        e.seed = f.at("seed").get<uint64_t>();
        m.files.push_back(e);
    }
    return m;
}

Manifest simulate(const ExperimentConfig& cfg, const fs::path& out_dir) {
    cfg.validate();
    fs::create_directories(out_dir);
    std::vector<TraceJob> jobs;
    for (int r = 0; r < cfg.runs; ++r) {
        for (QuadConfig q : {QuadConfig::XX, QuadConfig::PP, QuadConfig::XP})
            jobs.push_back({TraceKind::Signal, q, r});
        if (cfg.include_eom_off && !cfg.synth.drive.empty()) {
            jobs.push_back({TraceKind::SignalOff, QuadConfig::XX, r});
            jobs.push_back({TraceKind::SignalOff, QuadConfig::PP, r});
        }
    }
    // references are taken even when no signal runs are requested
    for (int r = 0; r < std::max(cfg.runs, 1); ++r) {
        jobs.push_back({TraceKind::Shot, QuadConfig::XX, r});
        jobs.push_back({TraceKind::Elec, QuadConfig::XX, r});
    }

    Manifest m;
    m.config = cfg;
    m.files.resize(jobs.size());
    parallel_for(static_cast<int>(jobs.size()), worker_count(static_cast<int>(jobs.size())),
                 [&](int i) {
                     const TraceJob& job = jobs[i];
                     SynthConfig sc = cfg.synth;
                     sc.quad_config = job.quad;
                     sc.seed = job_seed(cfg.synth.seed, job);
                     TraceSet t;
                     switch (job.kind) {
                         case TraceKind::Signal: t = synth_traces(sc); break;
                         case TraceKind::SignalOff: t = eom_off_traces(sc); break;
                         case TraceKind::Shot: t = shot_traces(sc); break;
                         case TraceKind::Elec: t = elec_traces(sc); break;
                     }
                     std::string name = job_filename(job);
                     write_trace(out_dir / name, t);
                     m.files[i] = {name, job.kind, job.quad, job.run, sc.seed};
                 });
    write_manifest(out_dir / "manifest.json", m);
    save_config_file((out_dir / "config.json").string(), cfg);
    return m;
}

namespace {

// accumulating sector average across runs
struct EstimateAccumulator {
    CovarianceEstimate acc;
    int counts[4][4] = {};

    void add(const CovarianceEstimate& one) {
        if (acc.bins == 0) {
            acc = one;
            for (int a = 0; a < 4; ++a)
                for (int b = 0; b < 4; ++b) counts[a][b] = one.measured[a][b] ? 1 : 0;
            return;
        }
        acc.sigma += one.sigma;
        acc.run_count += one.run_count;
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b)
                if (one.measured[a][b]) {
                    acc.measured[a][b] = true;
                    ++counts[a][b];
                }
    }
    CovarianceEstimate average() const {
        CovarianceEstimate out = acc;
        int m = out.bins;
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b)
                if (counts[a][b] > 1) out.sigma.block(a * m, b * m, m, m) /= counts[a][b];
        return out;
    }
    bool empty() const { return acc.bins == 0; }
};

double ratio_db(double num, double den) {
    require(den > 0, "nonpositive shot reference");
    return 10.0 * std::log10(num / den);
}

}  // namespace

AnalysisResult analyze(const Manifest& m, const fs::path& manifest_dir) {
    const ExperimentConfig& cfg = m.config;
    const ModeLayout& layout = cfg.synth.layout;
    const double dt = cfg.synth.sample_dt_s;
    require(!m.files.empty(), "empty manifest");
    const int mm = layout.mode_count;

    bool have[4][3] = {};
    for (const auto& e : m.files) have[static_cast<int>(e.kind)][static_cast<int>(e.quad)] = true;
    const bool shot_only = !have[0][0] && !have[0][1] && !have[0][2];
    auto need = [&](TraceKind k, QuadConfig q, const std::string& name) {
        require(have[static_cast<int>(k)][static_cast<int>(q)],
                "manifest is missing required runs for sector " + name);
    };
    need(TraceKind::Shot, QuadConfig::XX, "shot");
    if (!shot_only) {
        need(TraceKind::Signal, QuadConfig::XX, "XX");
        need(TraceKind::Signal, QuadConfig::PP, "PP");
        need(TraceKind::Signal, QuadConfig::XP, "XP");
    }
    if (cfg.analysis.normalization == NormalizeMode::ElecSubtract)
        need(TraceKind::Elec, QuadConfig::XX, "elec");

    // delay estimation: prefer an EOM-off XX run, fall back to EOM-on XX
    std::optional<double> delay;
    if (cfg.analysis.compensate_delay && !shot_only) {
        const ManifestEntry* pick = nullptr;
        for (const auto& e : m.files)
            if (e.kind == TraceKind::SignalOff && e.quad == QuadConfig::XX && !pick) pick = &e;
        for (const auto& e : m.files)
            if (e.kind == TraceKind::Signal && e.quad == QuadConfig::XX && !pick) pick = &e;
        if (pick) {
            TraceSet t = read_trace(manifest_dir / pick->path);
            long n = static_cast<long>(t.probe_codes.size());
            delay = estimate_delay(fft_real(t.probe()), fft_real(t.conjugate()), n, dt, layout,
                                   QuadConfig::XX);
        }
    }
    const double comp = delay.value_or(0.0);

    // tone pairs for the lock-in path
    std::map<int, std::vector<std::pair<int, int>>> tone_pairs;
    if (cfg.analysis.method != "matrix") {
        for (const auto& tone : cfg.synth.drive.tones) {
            int k = tone.offset(layout);
            for (int i = 0; i + k < mm; ++i) tone_pairs[k].push_back({i, i + k});
        }
    }

    EstimateAccumulator acc_on, acc_off, acc_shot, acc_elec;
    std::map<int, std::vector<std::complex<double>>> lockin_z;  // offset -> per-pair sum
    int xp_run_count = 0;
    for (const auto& [k, pairs] : tone_pairs)
        lockin_z[k].assign(pairs.size(), {0.0, 0.0});
    std::mutex merge_mutex;

    parallel_for(
        static_cast<int>(m.files.size()), worker_count(static_cast<int>(m.files.size())),
        [&](int i) {
            const ManifestEntry& entry = m.files[i];
            TraceSet t = read_trace(manifest_dir / entry.path);
            long n = static_cast<long>(t.probe_codes.size());
            Spectrum probe = fft_real(t.probe());
            Spectrum conj = fft_real(t.conjugate());
            if (comp != 0.0) conj = apply_delay(conj, n, dt, -comp);
            RunData rd;
            rd.quad = entry.quad;
            rd.kind = entry.kind;
            rd.probe = bin_filter(probe, n, dt, layout);
            rd.conj = bin_filter(conj, n, dt, layout);
            probe.clear();
            conj.clear();
            int band = cfg.analysis.band_limit;
            CovarianceEstimate one;
            if (entry.kind == TraceKind::Shot || entry.kind == TraceKind::Elec) {
                // vacuum and dark references are quadrature-agnostic: the same
                // data calibrates the X and P sectors
                RunData as_pp = rd;
                as_pp.quad = QuadConfig::PP;
                rd.quad = QuadConfig::XX;
                one = assemble_covariance({rd, as_pp}, band);
            } else {
                one = assemble_covariance({rd}, band);
            }

            std::map<int, std::vector<std::complex<double>>> z_local;
            if (entry.kind == TraceKind::Signal && entry.quad == QuadConfig::XP) {
                for (const auto& [k, pairs] : tone_pairs) {
                    auto& zs = z_local[k];
                    zs.assign(pairs.size(), {0.0, 0.0});
                    double tone_hz = k * layout.spacing_hz;
                    for (size_t p = 0; p < pairs.size(); ++p) {
                        auto [a, b] = pairs[p];
                        LockinResult up = lockin_xp(rd.probe, a, rd.conj, b, tone_hz);
                        LockinResult dn = lockin_xp(rd.probe, b, rd.conj, a, tone_hz);
                        zs[p] = 0.5 * (std::polar(up.amplitude, up.phase) +
                                       std::polar(dn.amplitude, dn.phase));
                    }
                }
            }

            std::lock_guard<std::mutex> lock(merge_mutex);
            switch (entry.kind) {
                case TraceKind::Signal:
                    acc_on.add(one);
                    if (entry.quad == QuadConfig::XP) {
                        ++xp_run_count;
                        for (auto& [k, zs] : z_local)
                            for (size_t p = 0; p < zs.size(); ++p) lockin_z[k][p] += zs[p];
                    }
                    break;
                case TraceKind::SignalOff: acc_off.add(one); break;
                case TraceKind::Shot: acc_shot.add(one); break;
                case TraceKind::Elec: acc_elec.add(one); break;
            }
        });

    CovarianceEstimate est_on = shot_only ? acc_shot.average() : acc_on.average();
    CovarianceEstimate est_shot = acc_shot.average();
    CovarianceEstimate est_elec;
    if (!acc_elec.empty()) est_elec = acc_elec.average();
    const CovarianceEstimate* elec = acc_elec.empty() ? nullptr : &est_elec;

    AnalysisResult res;
    res.layout = layout;
    res.delay_estimate_s = delay;
    res.raw = est_on;
    res.normalized = normalize(est_on, est_shot, elec, cfg.analysis.normalization);

    MeasurementNullifiers rows = measurement_nullifiers(layout, cfg.synth.drive);
    res.edge_modes = rows.edge;
    CovarianceMatrix sig_norm = res.normalized.as_covariance();
    CovarianceMatrix unit_shot{Eigen::MatrixXd::Identity(4 * mm, 4 * mm),
                               Normalization::ShotNormalized};
    ModeLayout flat = layout;
    flat.guard_modes = 0;  // the measured space carries interior bins only
    flat.start_center_hz = layout.start_center_hz;
    auto finish_report = [&](NullifierReport& rep, NullifierMethod method) {
        rep.method = method;
        rep.run_count = cfg.runs;
        rep.window_s = cfg.synth.window_s();
        for (size_t i = 0; i < rep.entries.size(); ++i) rep.entries[i].edge = rows.edge[i];
    };
    res.report_matrix = nullifier_report(sig_norm, unit_shot, rows.epr, rows.transformed, flat);
    finish_report(res.report_matrix, NullifierMethod::Matrix);

    if (!tone_pairs.empty() && xp_run_count > 0) {
        CovarianceEstimate lock_est = est_on;
        auto xp_block = lock_est.sigma.block(kXp * mm, kPc * mm, mm, mm);
        for (auto& [k, zs] : lockin_z) {
            const auto& pairs = tone_pairs[k];
            std::complex<double> mean(0, 0);
            for (auto& z : zs) {
                z /= xp_run_count;
                mean += z;
            }
            // compensated drive phase, folded onto the covariance axis
            if (mean.real() < 0) mean = -mean;
            double phi = std::abs(mean) > 0 ? std::arg(mean) : 0.0;
            double tone_hz = k * layout.spacing_hz;
            for (size_t p = 0; p < pairs.size(); ++p) {
                auto [a, b] = pairs[p];
                double value = (zs[p] * std::polar(1.0, -phi)).real();
                xp_block(a, b) = value;
                xp_block(b, a) = value;
                res.phase_table.push_back({tone_hz, a + 1, b + 1, std::abs(zs[p]),
                                           std::arg(zs[p])});
            }
        }
        lock_est.sigma.block(kPc * mm, kXp * mm, mm, mm) =
            lock_est.sigma.block(kXp * mm, kPc * mm, mm, mm).transpose().eval();
        CovarianceEstimate lock_norm =
            normalize(lock_est, est_shot, elec, cfg.analysis.normalization);
        res.report_lockin =
            nullifier_report(lock_norm.as_covariance(), unit_shot, rows.epr, rows.transformed, flat);
        finish_report(res.report_lockin, NullifierMethod::Lockin);
    }

    // four-curve summary: red from the EOM-off estimate, blue/gold/circles
    // from the reports
    res.four_curve.centers_hz.resize(mm);
    for (int i = 0; i < mm; ++i)
        res.four_curve.centers_hz[i] = layout.center_hz(layout.interior_begin() + i);
    for (const auto& e : res.report_matrix.entries) {
        res.four_curve.epr_on_x_db.push_back(e.epr_x_db);
        res.four_curve.epr_on_p_db.push_back(e.epr_p_db);
        res.four_curve.null_x_db.push_back(e.null_x_db);
        res.four_curve.null_p_db.push_back(e.null_p_db);
    }
    for (const auto& e : res.report_lockin.entries) {
        res.four_curve.lockin_x_db.push_back(e.null_x_db);
        res.four_curve.lockin_p_db.push_back(e.null_p_db);
    }
    res.four_curve.has_lockin = !res.report_lockin.entries.empty();
    if (!acc_off.empty()) {
        CovarianceEstimate est_off = acc_off.average();
        CovarianceEstimate off_norm = normalize(est_off, est_shot, elec, cfg.analysis.normalization);
        for (int i = 0; i < mm; ++i) {
            double vx = off_norm.sigma(kXp * mm + i, kXp * mm + i) +
                        off_norm.sigma(kXc * mm + i, kXc * mm + i) -
                        2 * off_norm.sigma(kXp * mm + i, kXc * mm + i);
            double vp = off_norm.sigma(kPp * mm + i, kPp * mm + i) +
                        off_norm.sigma(kPc * mm + i, kPc * mm + i) +
                        2 * off_norm.sigma(kPp * mm + i, kPc * mm + i);
            res.four_curve.epr_off_x_db.push_back(ratio_db(vx, 2.0));
            res.four_curve.epr_off_p_db.push_back(ratio_db(vp, 2.0));
        }
        res.four_curve.has_off = true;
    }
    return res;
}

void write_analysis(const AnalysisResult& r, const ExperimentConfig& cfg,
                    const fs::path& out_dir) {
    fs::create_directories(out_dir);
    write_covariance_binary(out_dir / "covariance.cvl1", r.normalized.as_covariance());
    write_covariance_csv(out_dir / "covariance.csv", r.normalized.as_covariance(), r.layout);
    write_nullifier_csv(out_dir / "nullifiers_matrix.csv", r.report_matrix);
    if (!r.report_lockin.entries.empty())
        write_nullifier_csv(out_dir / "nullifiers_lockin.csv", r.report_lockin);
    write_four_curve_csv(out_dir / "spectra.csv", r.four_curve);
    if (!r.phase_table.empty()) write_phase_table_csv(out_dir / "lockin_phases.csv", r.phase_table);
    json meta;
    meta["delay_estimate_s"] = r.delay_estimate_s ? json(*r.delay_estimate_s) : json(nullptr);
    meta["runs"] = cfg.runs;
    std::ofstream os(out_dir / "analysis.json");
    os << meta.dump(2) << "\n";
    save_config_file((out_dir / "config.json").string(), cfg);
}

Eigen::VectorXd projected_error_vector(const CovarianceMatrix& sigma, const ModeLayout& layout,
                                       const DriveSpec& drive) {
    VUExtraction vu = extract_v_u(sigma);
    int n = layout.total_bins();
    // expected cluster support: same-index pairing plus the drive offsets
    Eigen::MatrixXd mask = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    std::vector<int> offsets;
    for (const auto& t : drive.tones) offsets.push_back(t.offset(layout));
    for (int i = 0; i < n; ++i) {
        mask(i, n + i) = mask(n + i, i) = 1.0;
        for (int k : offsets) {
            for (int j : {i - k, i + k}) {
                if (j < 0 || j >= n) continue;
                mask(i, j) = mask(j, i) = 1.0;
                mask(n + i, n + j) = mask(n + j, n + i) = 1.0;
                mask(i, n + j) = mask(n + j, i) = 1.0;
                mask(n + i, j) = mask(j, n + i) = 1.0;
            }
        }
    }
    Eigen::MatrixXd v_proj = vu.v.cwiseProduct(mask);
    ErrorMatrix err = error_matrix(sigma, v_proj);
    Eigen::VectorXd interior(2 * layout.mode_count);
    for (int i = 0; i < layout.mode_count; ++i) {
        interior(i) = err.error_vector(layout.interior_begin() + i);
        interior(layout.mode_count + i) = err.error_vector(n + layout.interior_begin() + i);
    }
    return interior;
}

TheoryResult theory(const ExperimentConfig& cfg) {
    cfg.validate();
    const ModeLayout& layout = cfg.synth.layout;
    TheoryResult res;
    res.sigma = theory_covariance(layout, cfg.synth.profile, cfg.synth.drive);
    res.sigma_normalized = shot_normalize(res.sigma);

    NullifierMatrix epr = epr_nullifier_matrix(layout);
    NullifierMatrix transformed =
        cfg.synth.drive.empty() ? epr : transform_nullifiers(epr, layout, cfg.synth.drive);
    int kmax = cfg.synth.drive.empty() ? 0 : cfg.synth.drive.max_offset(layout);
    res.report = nullifier_report(res.sigma, vacuum_covariance(layout), epr, transformed, layout,
                                  kmax);
    res.report.method = NullifierMethod::Matrix;

    res.sigma_glu = glu_transform(res.sigma, layout);
    res.vu = extract_v_u(res.sigma_glu);
    res.error_vector = projected_error_vector(res.sigma_glu, layout, cfg.synth.drive);

    res.adjacency = covariance_adjacency(res.sigma_normalized, layout, cfg.analysis.threshold);
    if (!cfg.synth.drive.empty())
        res.expected = expected_hypercube(layout, HypercubeSpec::from_drive(layout, cfg.synth.drive));
    return res;
}

void write_theory(const TheoryResult& r, const ExperimentConfig& cfg, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    const ModeLayout& layout = cfg.synth.layout;
    write_covariance_binary(out_dir / "theory_covariance.cvl1", r.sigma);
    write_covariance_csv(out_dir / "theory_covariance.csv", r.sigma, layout);
    write_covariance_binary(out_dir / "theory_covariance_normalized.cvl1", r.sigma_normalized);
    write_nullifier_csv(out_dir / "theory_nullifiers.csv", r.report);
    {
        std::ofstream os(out_dir / "error_vector.csv");
        os << "index,error\n";
        for (Eigen::Index i = 0; i < r.error_vector.size(); ++i)
            os << (i + 1) << ',' << format_double(r.error_vector(i)) << '\n';
    }
    std::ofstream(out_dir / "graph_expected.json") << graph_to_json(r.expected);
    std::ofstream(out_dir / "graph_expected.dot") << graph_to_dot(r.expected);
    std::ofstream(out_dir / "graph_adjacency.json") << graph_to_json(r.adjacency);
    std::ofstream(out_dir / "graph_adjacency.dot") << graph_to_dot(r.adjacency);
    json meta;
    meta["vu_residual"] = r.vu.residual;
    meta["error_vector_max"] = r.error_vector.size() ? r.error_vector.maxCoeff() : 0.0;
    std::ofstream os(out_dir / "theory.json");
    os << meta.dump(2) << "\n";
    save_config_file((out_dir / "config.json").string(), cfg);
}

StructureReport verify(const CovarianceMatrix& sigma_normalized, const ExperimentConfig& cfg,
                       double threshold) {
    const ModeLayout& layout = cfg.synth.layout;
    ModeLayout data_layout = layout;
    if (sigma_normalized.m.rows() == 4 * layout.mode_count && layout.guard_modes > 0)
        data_layout.guard_modes = 0;  // measured covariances carry interior bins only
    AdjacencyGraph measured = covariance_adjacency(sigma_normalized, data_layout, threshold);
    AdjacencyGraph expected =
        expected_hypercube(data_layout, HypercubeSpec::from_drive(layout, cfg.synth.drive));
    return verify_structure(measured, expected, threshold);
}

std::string structure_report_json(const StructureReport& rep) {
    json j;
    auto dump_edges = [](const std::vector<AdjacencyGraph::Edge>& edges) {
        json arr = json::array();
        for (const auto& e : edges)
            arr.push_back({{"a", e.a}, {"b", e.b}, {"weight", e.weight}});
        return arr;
    };
    j["pass"] = rep.pass;
    j["matched"] = dump_edges(rep.matched);
    j["missing"] = dump_edges(rep.missing);
    j["extraneous"] = dump_edges(rep.extraneous);
    j["traceback"] = dump_edges(rep.traceback);
    j["extraneous_fraction_limit"] = rep.extraneous_fraction_limit;
    return j.dump(2) + "\n";
}

}  // namespace cvl
