#include "cvl/io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

#include "cvl/config.hpp"

namespace cvl {

namespace {

void put_bytes(std::ostream& os, const void* p, size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}
void get_bytes(std::istream& is, void* p, size_t n) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    require(static_cast<size_t>(is.gcount()) == n, "truncated file");
}
template <typename T>
void put(std::ostream& os, T v) {
    put_bytes(os, &v, sizeof v);
}
template <typename T>
T get(std::istream& is) {
    T v;
    get_bytes(is, &v, sizeof v);
    return v;
}
void put_string(std::ostream& os, const std::string& s) {
    put<uint32_t>(os, static_cast<uint32_t>(s.size()));
    put_bytes(os, s.data(), s.size());
}
std::string get_string(std::istream& is) {
    auto n = get<uint32_t>(is);
    std::string s(n, '\0');
    get_bytes(is, s.data(), n);
    return s;
}

std::ofstream open_out(const std::filesystem::path& path, bool binary) {
    std::ofstream os(path, binary ? std::ios::binary : std::ios::out);
    require(os.good(), "cannot open for writing: " + path.string());
    return os;
}
std::ifstream open_in(const std::filesystem::path& path, bool binary) {
    std::ifstream is(path, binary ? std::ios::binary : std::ios::in);
    require(is.good(), "cannot open for reading: " + path.string());
    return is;
}

}  // namespace

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_covariance_binary(const std::filesystem::path& path, const CovarianceMatrix& m) {
    auto os = open_out(path, true);
    os.write("CVL1", 4);
    put<uint32_t>(os, static_cast<uint32_t>(m.m.rows()));
    put<uint8_t>(os, m.norm == Normalization::ShotNormalized ? 1 : 0);
    for (Eigen::Index i = 0; i < m.m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.m.cols(); ++j) put<double>(os, m.m(i, j));
}

CovarianceMatrix read_covariance_binary(const std::filesystem::path& path) {
    auto is = open_in(path, true);
    char magic[4];
    get_bytes(is, magic, 4);
    require(std::memcmp(magic, "CVL1", 4) == 0, "not a CVL1 file: " + path.string());
    auto dim = get<uint32_t>(is);
    auto tag = get<uint8_t>(is);
    CovarianceMatrix m;
    m.norm = tag ? Normalization::ShotNormalized : Normalization::Absolute;
    m.m.resize(dim, dim);
    for (uint32_t i = 0; i < dim; ++i)
        for (uint32_t j = 0; j < dim; ++j) m.m(i, j) = get<double>(is);
    return m;
}

void write_covariance_csv(const std::filesystem::path& path, const CovarianceMatrix& m,
                          const ModeLayout& layout) {
    auto os = open_out(path, false);
    os << "# ordering: blocks (Xp, Xc, Pp, Pc), mode index ascending\n";
    os << "# layout: modes=" << layout.mode_count << " guards=" << layout.guard_modes
       << " spacing_hz=" << format_double(layout.spacing_hz)
       << " bin_width_hz=" << format_double(layout.bin_width_hz)
       << " start_center_hz=" << format_double(layout.start_center_hz) << "\n";
    os << "# normalization: "
       << (m.norm == Normalization::ShotNormalized ? "shot-normalized" : "absolute") << "\n";
    for (Eigen::Index i = 0; i < m.m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.m.cols(); ++j) {
            if (j) os << ',';
            os << format_double(m.m(i, j));
        }
        os << '\n';
    }
}

CovarianceMatrix read_covariance_csv(const std::filesystem::path& path) {
    auto is = open_in(path, false);
    CovarianceMatrix m;
    m.norm = Normalization::Absolute;
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (line.find("shot-normalized") != std::string::npos)
                m.norm = Normalization::ShotNormalized;
            continue;
        }
        std::vector<double> row;
        size_t pos = 0;
        while (pos <= line.size()) {
            size_t next = line.find(',', pos);
            if (next == std::string::npos) next = line.size();
            row.push_back(std::stod(line.substr(pos, next - pos)));
            pos = next + 1;
        }
        rows.push_back(std::move(row));
    }
    require(!rows.empty() && rows.size() == rows[0].size(), "malformed covariance CSV");
    m.m.resize(rows.size(), rows.size());
    for (size_t i = 0; i < rows.size(); ++i)
        for (size_t j = 0; j < rows.size(); ++j) m.m(i, j) = rows[i][j];
    return m;
}

void write_trace(const std::filesystem::path& path, const TraceSet& t) {
    auto os = open_out(path, true);
    os.write("CVLT", 4);
    put<uint16_t>(os, 1);  // version
    put<double>(os, t.config.sample_dt_s);
    put<uint64_t>(os, t.probe_codes.size());
    put_string(os, t.probe_label);
    put_string(os, t.conj_label);
    put<double>(os, t.quant_step);
    put<uint16_t>(os, static_cast<uint16_t>(t.config.digitizer_bits));
    put<uint64_t>(os, t.config.seed);
    put<uint8_t>(os, static_cast<uint8_t>(t.kind));
    put_string(os, synth_config_to_json(t.config));
    bool narrow = t.config.digitizer_bits <= 8;
    auto put_codes = [&](const std::vector<int16_t>& codes) {
        if (narrow)
            for (int16_t c : codes) put<int8_t>(os, static_cast<int8_t>(c));
        else
            for (int16_t c : codes) put<int16_t>(os, c);
    };
    put_codes(t.probe_codes);
    put_codes(t.conj_codes);
}

TraceSet read_trace(const std::filesystem::path& path) {
    auto is = open_in(path, true);
    char magic[4];
    get_bytes(is, magic, 4);
    require(std::memcmp(magic, "CVLT", 4) == 0, "not a CVLT file: " + path.string());
    auto version = get<uint16_t>(is);
    require(version == 1, "unsupported CVLT version");
    TraceSet t;
    double dt = get<double>(is);
    auto n = get<uint64_t>(is);
    t.probe_label = get_string(is);
    t.conj_label = get_string(is);
    t.quant_step = get<double>(is);
    auto bits = get<uint16_t>(is);
    auto seed = get<uint64_t>(is);
    t.kind = static_cast<TraceKind>(get<uint8_t>(is));
    t.config = synth_config_from_json(get_string(is));
    require(t.config.sample_dt_s == dt && t.config.seed == seed &&
                t.config.digitizer_bits == bits,
            "CVLT header inconsistent with embedded config");
    bool narrow = bits <= 8;
    auto get_codes = [&](std::vector<int16_t>& codes) {
        codes.resize(n);
        if (narrow)
            for (auto& c : codes) c = get<int8_t>(is);
        else
            for (auto& c : codes) c = get<int16_t>(is);
    };
    get_codes(t.probe_codes);
    get_codes(t.conj_codes);
    return t;
}

void write_nullifier_csv(const std::filesystem::path& path, const NullifierReport& report) {
    auto os = open_out(path, false);
    os << "# runs=" << report.run_count << " window_s=" << format_double(report.window_s) << "\n";
    os << "mode_center_hz,epr_x_db,epr_p_db,null_x_db,null_p_db,method\n";
    const char* method = report.method == NullifierMethod::Matrix ? "matrix" : "lockin";
    for (const auto& e : report.entries) {
        os << format_double(e.center_hz) << ',' << format_double(e.epr_x_db) << ','
           << format_double(e.epr_p_db) << ',' << format_double(e.null_x_db) << ','
           << format_double(e.null_p_db) << ',' << method << '\n';
    }
}

void write_four_curve_csv(const std::filesystem::path& path, const FourCurve& fc) {
    auto os = open_out(path, false);
    os << "mode,center_hz,epr_off_x_db,epr_off_p_db,epr_on_x_db,epr_on_p_db,"
          "null_x_db,null_p_db,lockin_x_db,lockin_p_db\n";
    auto col = [&](const std::vector<double>& v, size_t i) {
        return i < v.size() ? format_double(v[i]) : std::string();
    };
    for (size_t i = 0; i < fc.centers_hz.size(); ++i) {
        os << (i + 1) << ',' << format_double(fc.centers_hz[i]) << ','
           << col(fc.epr_off_x_db, i) << ',' << col(fc.epr_off_p_db, i) << ','
           << col(fc.epr_on_x_db, i) << ',' << col(fc.epr_on_p_db, i) << ','
           << col(fc.null_x_db, i) << ',' << col(fc.null_p_db, i) << ','
           << col(fc.lockin_x_db, i) << ',' << col(fc.lockin_p_db, i) << '\n';
    }
}

void write_phase_table_csv(const std::filesystem::path& path,
                           const std::vector<PhaseTableEntry>& table) {
    auto os = open_out(path, false);
    os << "tone_hz,bin_a,bin_b,amplitude,phase_rad\n";
    for (const auto& e : table)
        os << format_double(e.tone_hz) << ',' << e.bin_a << ',' << e.bin_b << ','
           << format_double(e.amplitude) << ',' << format_double(e.phase_rad) << '\n';
}

}  // namespace cvl
