#include "sfset/sfset_io.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace sfs {

namespace {

constexpr char kMagic[6] = {'S', 'F', 'S', 'E', 'T', '\x01'};

template <typename T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw Error("truncated successor feature set artifact");
    return v;
}

std::int32_t get_count(std::istream& in, std::int32_t limit = 1 << 28) {
    const auto n = get<std::int32_t>(in);
    if (n < 0 || n > limit) throw Error("corrupt successor feature set artifact");
    return n;
}

void put_row_major(std::ostream& out, const Matrix& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) put<double>(out, m(i, j));
}

Matrix get_row_major(std::istream& in, Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = get<double>(in);
    return m;
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_double(const std::string& s) {
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    return std::stod(s);
}

}  // namespace

void write_sfset(std::ostream& out, const SFSet& set) {
    out.write(kMagic, sizeof(kMagic));
    put<std::uint64_t>(out, set.fingerprint);
    put<std::int32_t>(out, set.d);
    put<std::int32_t>(out, set.k);
    put<std::int32_t>(out, set.num_actions);
    put<std::int32_t>(out, set.num_observations);
    put<std::int32_t>(out, set.iteration);
    put<std::uint64_t>(out, set.directions.seed);
    put<std::int32_t>(out, set.directions.size());
    for (const Matrix& m : set.directions.directions) put_row_major(out, m);
    for (const SFCell& c : set.cells) {
        const auto r = static_cast<std::int32_t>(c.rows.size());
        put<std::int32_t>(out, r);
        for (int x : c.rows) put<std::int32_t>(out, x);
        put<std::int32_t>(out, c.size());
        for (int j = 0; j < c.size(); ++j) {
            const RowVector row = c.points.row(j);
            put_row_major(out, Eigen::Map<const Matrix>(row.data(), set.d, r));
        }
        for (int s : c.slot) put<std::int32_t>(out, s);
    }
    if (!out) throw Error("failed to write successor feature set");
}

SFSet read_sfset(std::istream& in) {
    char magic[sizeof(kMagic)];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw Error("not a successor feature set artifact");
    SFSet set;
    set.fingerprint = get<std::uint64_t>(in);
    set.d = get_count(in);
    set.k = get_count(in);
    set.num_actions = get_count(in);
    set.num_observations = get_count(in);
    set.iteration = get_count(in);
    set.directions.seed = get<std::uint64_t>(in);
    const int N = get_count(in);
    for (int i = 0; i < N; ++i) set.directions.directions.push_back(get_row_major(in, set.d, set.k));
    const int cells = set.num_actions * set.num_observations;
    for (int c = 0; c < cells; ++c) {
        SFCell cell;
        const int r = get_count(in, set.k);
        for (int x = 0; x < r; ++x) cell.rows.push_back(get_count(in, set.k - 1));
        const int n = get_count(in);
        cell.points.resize(n, static_cast<Eigen::Index>(set.d) * r);
        for (int j = 0; j < n; ++j) {
            const Matrix block = get_row_major(in, set.d, r);
            cell.points.row(j) = Eigen::Map<const RowVector>(block.data(), block.size());
        }
        for (int i = 0; i < N; ++i) {
            const auto s = get<std::int32_t>(in);
            if (s < -1 || s >= n) throw Error("corrupt slot index in successor feature set artifact");
            cell.slot.push_back(s);
        }
        set.cells.push_back(std::move(cell));
    }
    return set;
}

void save_sfset(const SFSet& set, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path + " for writing");
    write_sfset(out, set);
}

SFSet load_sfset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    return read_sfset(in);
}

void write_trace_csv(std::ostream& out, const DpTrace& trace) {
    out << kTraceHeader << '\n' << kTraceColumns << '\n';
    for (const TraceRow& r : trace.rows) {
        out << r.iteration << ',' << format_double(r.max_error_optimized) << ','
            << format_double(r.max_error_fresh) << ',' << format_double(r.fresh_error_stderr) << ','
            << format_double(r.max_support_change) << ',' << r.num_points << ','
            << format_double(r.wall_time) << '\n';
    }
    out << "# converged=" << (trace.converged ? 1 : 0) << '\n';
}

DpTrace read_trace_csv(std::istream& in) {
    DpTrace trace;
    std::string line;
    if (!std::getline(in, line) || line != kTraceHeader) throw Error("unsupported trace format");
    if (!std::getline(in, line) || line != kTraceColumns) throw Error("unexpected trace columns");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line.rfind("# converged=", 0) == 0) {
            trace.converged = line.back() == '1';
            continue;
        }
        std::stringstream ss(line);
        std::string f[7];
        for (std::string& s : f)
            if (!std::getline(ss, s, ',')) throw Error("short trace row");
        TraceRow r;
        r.iteration = std::stoi(f[0]);
        r.max_error_optimized = parse_double(f[1]);
        r.max_error_fresh = parse_double(f[2]);
        r.fresh_error_stderr = parse_double(f[3]);
        r.max_support_change = parse_double(f[4]);
        r.num_points = std::stoi(f[5]);
        r.wall_time = parse_double(f[6]);
        trace.rows.push_back(r);
    }
    return trace;
}

void save_trace_csv(const DpTrace& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path + " for writing");
    write_trace_csv(out, trace);
}

}  // namespace sfs
