#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "hystkin/errors.hpp"
#include "hystkin/log.hpp"

namespace hystkin {

// One (control input, bending angle) measurement inside a reciprocating
// cycle. q is dimensionless, gamma is in degrees.
struct Sample {
    double q = 0.0;
    double gamma = 0.0;
    int cycle_id = 0;
    int step_index = 0;

    friend bool operator==(const Sample&, const Sample&) = default;
};

enum class BranchLabel { ascending, descending };  // cw / ccw motor direction

// Cyclic input/angle data: C cycles of N points each, sorted by
// (cycle_id, step_index). Immutable after load.
struct CycleDataset {
    std::vector<Sample> samples;
    int cycles = 0;            // C
    int points_per_cycle = 0;  // N
    double q_min = -1.0;
    double q_max = 1.0;

    int total_points() const { return cycles * points_per_cycle; }

    // Samples of the c-th cycle in sorted order.
    const Sample* cycle_begin(int c) const { return samples.data() + static_cast<std::ptrdiff_t>(c) * points_per_cycle; }
    const Sample* cycle_end(int c) const { return cycle_begin(c) + points_per_cycle; }
};

struct BranchSplit {
    std::vector<Sample> ascending;   // cw: up to and including the per-cycle q maximum
    std::vector<Sample> descending;  // ccw: the remainder of each cycle
};

namespace detail {

inline std::string_view trim_cr(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    return line;
}

inline double parse_double_field(std::string_view field, const std::string& context) {
    double value = 0.0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || field.empty())
        raise(ErrorKind::non_numeric_field, "non-numeric field '" + std::string(field) + "' in " + context);
    return value;
}

inline int parse_int_field(std::string_view field, const std::string& context) {
    int value = 0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || field.empty())
        raise(ErrorKind::non_numeric_field, "non-numeric field '" + std::string(field) + "' in " + context);
    return value;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return fields;
}

// Shortest decimal text that round-trips the double exactly.
inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

// Centered moving average of window 5, truncated at the edges.
inline std::vector<double> smooth_window5(const std::vector<double>& q) {
    const int n = static_cast<int>(q.size());
    std::vector<double> out(q.size());
    for (int i = 0; i < n; ++i) {
        const int lo = std::max(0, i - 2);
        const int hi = std::min(n - 1, i + 2);
        double sum = 0.0;
        for (int j = lo; j <= hi; ++j) sum += q[j];
        out[i] = sum / static_cast<double>(hi - lo + 1);
    }
    return out;
}

}  // namespace detail

inline constexpr std::string_view kCsvHeader = "cycle_id,step_index,q,gamma";

// Reads the dataset CSV schema: header `cycle_id,step_index,q,gamma`, one
// sample per line. Validates bounds, cycle regularity and step ordering.
inline CycleDataset load_csv(const std::filesystem::path& path, double q_min, double q_max) {
    if (!(q_min < q_max))
        raise(ErrorKind::bad_config, "q_min must be smaller than q_max");
    std::ifstream in(path, std::ios::binary);
    if (!in)
        raise(ErrorKind::io_failure, "cannot open '" + path.string() + "' for reading");

    std::string line;
    if (!std::getline(in, line))
        raise(ErrorKind::missing_column, "empty file, expected header '" + std::string(kCsvHeader) + "'");
    if (detail::trim_cr(line) != kCsvHeader)
        raise(ErrorKind::missing_column,
              "bad header '" + line + "', expected '" + std::string(kCsvHeader) + "'");

    CycleDataset ds;
    ds.q_min = q_min;
    ds.q_max = q_max;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view row = detail::trim_cr(line);
        if (row.empty() && in.peek() == std::char_traits<char>::eof()) break;  // trailing newline
        const auto fields = detail::split_fields(row);
        const std::string context = path.string() + ":" + std::to_string(line_no);
        if (fields.size() != 4)
            raise(ErrorKind::missing_column, context + ": expected 4 fields, got " + std::to_string(fields.size()));
        Sample s;
        s.cycle_id = detail::parse_int_field(fields[0], context);
        s.step_index = detail::parse_int_field(fields[1], context);
        s.q = detail::parse_double_field(fields[2], context);
        s.gamma = detail::parse_double_field(fields[3], context);
        if (s.cycle_id < 0 || s.step_index < 0)
            raise(ErrorKind::bad_format, context + ": negative cycle_id or step_index");
        if (!std::isfinite(s.q) || !std::isfinite(s.gamma))
            raise(ErrorKind::non_numeric_field, context + ": non-finite value");
        if (s.q < q_min || s.q > q_max)
            raise(ErrorKind::out_of_bounds,
                  context + ": q=" + detail::format_double(s.q) + " outside [" +
                      detail::format_double(q_min) + ", " + detail::format_double(q_max) + "]");
        ds.samples.push_back(s);
    }

    std::sort(ds.samples.begin(), ds.samples.end(), [](const Sample& a, const Sample& b) {
        if (a.cycle_id != b.cycle_id) return a.cycle_id < b.cycle_id;
        return a.step_index < b.step_index;
    });

    // Cycle regularity: every cycle must have the same length (fixed N).
    std::vector<int> lengths;
    int prev_cycle = -1;
    int prev_step = -1;
    for (const Sample& s : ds.samples) {
        if (s.cycle_id != prev_cycle) {
            lengths.push_back(0);
            prev_cycle = s.cycle_id;
            prev_step = -1;
        }
        if (s.step_index <= prev_step)
            raise(ErrorKind::bad_format, "step_index not strictly increasing in cycle " +
                                             std::to_string(s.cycle_id));
        prev_step = s.step_index;
        ++lengths.back();
    }
    if (lengths.empty())
        raise(ErrorKind::ragged_cycles, "dataset has no cycles");
    for (std::size_t i = 1; i < lengths.size(); ++i) {
        if (lengths[i] != lengths[0])
            raise(ErrorKind::ragged_cycles, "cycle lengths differ: " + std::to_string(lengths[0]) +
                                                " vs " + std::to_string(lengths[i]));
    }

    ds.cycles = static_cast<int>(lengths.size());
    ds.points_per_cycle = lengths[0];
    return ds;
}

// Writes the dataset CSV schema with LF line endings. Numbers use the
// shortest representation that reloads to the same double.
inline void write_csv(const CycleDataset& ds, std::ostream& out) {
    out << kCsvHeader << '\n';
    for (const Sample& s : ds.samples) {
        out << s.cycle_id << ',' << s.step_index << ',' << detail::format_double(s.q) << ','
            << detail::format_double(s.gamma) << '\n';
    }
}

inline std::string to_csv_string(const CycleDataset& ds) {
    std::ostringstream out;
    write_csv(ds, out);
    return out.str();
}

// Splits each reciprocating cycle at its q maximum: samples up to and
// including the turning point are ascending (cw), the rest descending (ccw).
// The argmax is located on a smoothed copy of q; labels apply to raw indices.
inline BranchSplit split_cycles(const CycleDataset& ds) {
    BranchSplit split;
    split.ascending.reserve(ds.samples.size());
    for (int c = 0; c < ds.cycles; ++c) {
        const Sample* begin = ds.cycle_begin(c);
        const int n = ds.points_per_cycle;
        std::vector<double> q(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) q[static_cast<std::size_t>(i)] = begin[i].q;
        const std::vector<double> smooth = detail::smooth_window5(q);

        int sign_flips = 0;
        int last_sign = 0;
        for (int i = 0; i + 1 < n; ++i) {
            const double d = smooth[static_cast<std::size_t>(i + 1)] - smooth[static_cast<std::size_t>(i)];
            if (d == 0.0) continue;
            const int sign = d > 0.0 ? 1 : -1;
            if (last_sign != 0 && sign != last_sign) ++sign_flips;
            last_sign = sign;
        }
        if (sign_flips > 1)
            raise(ErrorKind::multiple_turning_points,
                  "cycle " + std::to_string(begin->cycle_id) + " has " + std::to_string(sign_flips) +
                      " turning points after smoothing, expected one");
        if (sign_flips == 0)
            log::warn("cycle " + std::to_string(begin->cycle_id) +
                      " is monotone; descending branch will be empty");

        const auto peak = std::max_element(smooth.begin(), smooth.end());
        const int turn = static_cast<int>(peak - smooth.begin());
        for (int i = 0; i < n; ++i) {
            if (i <= turn)
                split.ascending.push_back(begin[i]);
            else
                split.descending.push_back(begin[i]);
        }
    }
    return split;
}

// First train_cycles cycles (by cycle_id order) become the training set,
// the remainder the test set.
inline std::pair<CycleDataset, CycleDataset> train_test_split(const CycleDataset& ds, int train_cycles) {
    if (train_cycles <= 0 || train_cycles >= ds.cycles)
        raise(ErrorKind::invalid_split, "train_cycles=" + std::to_string(train_cycles) +
                                            " must be in (0, " + std::to_string(ds.cycles) + ")");
    CycleDataset train;
    CycleDataset test;
    train.q_min = test.q_min = ds.q_min;
    train.q_max = test.q_max = ds.q_max;
    train.points_per_cycle = test.points_per_cycle = ds.points_per_cycle;
    train.cycles = train_cycles;
    test.cycles = ds.cycles - train_cycles;
    const auto boundary = ds.samples.begin() + static_cast<std::ptrdiff_t>(train_cycles) * ds.points_per_cycle;
    train.samples.assign(ds.samples.begin(), boundary);
    test.samples.assign(boundary, ds.samples.end());
    return {std::move(train), std::move(test)};
}

// (q, gamma) rows as an N x 2 matrix for mixture fitting.
inline Eigen::MatrixXd to_matrix(const std::vector<Sample>& samples) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(samples.size()), 2);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        m(i, 0) = samples[static_cast<std::size_t>(i)].q;
        m(i, 1) = samples[static_cast<std::size_t>(i)].gamma;
    }
    return m;
}

inline Eigen::MatrixXd to_matrix(const CycleDataset& ds) { return to_matrix(ds.samples); }

}  // namespace hystkin
