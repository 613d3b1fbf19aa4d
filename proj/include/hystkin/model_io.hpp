#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "hystkin/errors.hpp"
#include "hystkin/gmm.hpp"
#include "hystkin/gmr.hpp"
#include "hystkin/hysteresis.hpp"

namespace hystkin {

namespace detail {

// 17 significant digits: enough to reload any double exactly.
inline std::string format_17g(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
}

inline double parse_17g(std::string_view token, const std::string& context) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc() || ptr != token.data() + token.size())
        raise(ErrorKind::bad_format, context + ": bad number '" + std::string(token) + "'");
    return v;
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> tokens;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && line[i] == ' ') ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ') ++j;
        if (j > i) tokens.push_back(line.substr(i, j - i));
        i = j;
    }
    return tokens;
}

}  // namespace detail

// Writes contents to a temporary sibling and renames it into place, so an
// interrupted run never leaves a half-written artifact.
inline void atomic_write_file(const std::filesystem::path& path, std::string_view contents) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) raise(ErrorKind::io_failure, "cannot open '" + tmp.string() + "' for writing");
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) raise(ErrorKind::io_failure, "short write to '" + tmp.string() + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) raise(ErrorKind::io_failure, "cannot rename '" + tmp.string() + "' to '" + path.string() + "'");
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorKind::io_failure, "cannot open '" + path.string() + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// --- gmmodel v1 -------------------------------------------------------------
//
//   gmmodel v1
//   gmr input=0 output=1        (only when the file stores a regression model)
//   K D
//   pi mu... sigma_row_major...  (one line per component, 17 digits)

inline constexpr std::string_view kModelMagic = "gmmodel v1";

inline std::string serialize_mixture(const GaussianMixture& gm, const GmrModel* gmr = nullptr) {
    std::ostringstream out;
    out << kModelMagic << '\n';
    if (gmr != nullptr)
        out << "gmr input=" << gmr->input_index << " output=" << gmr->output_index << '\n';
    out << gm.k() << ' ' << gm.dim << '\n';
    for (const GaussianComponent& c : gm.components) {
        out << detail::format_17g(c.pi);
        for (int i = 0; i < gm.dim; ++i) out << ' ' << detail::format_17g(c.mu[i]);
        for (int i = 0; i < gm.dim; ++i)
            for (int j = 0; j < gm.dim; ++j) out << ' ' << detail::format_17g(c.sigma(i, j));
        out << '\n';
    }
    return out.str();
}

struct ParsedModel {
    GaussianMixture mixture;
    bool has_gmr = false;
    int input_index = 0;
    int output_index = 1;
};

inline ParsedModel parse_mixture(const std::string& text, const std::string& context) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) raise(ErrorKind::bad_format, context + ": empty model file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kModelMagic)
        raise(ErrorKind::bad_format, context + ": unknown model version '" + line + "'");

    ParsedModel parsed;
    if (!std::getline(in, line)) raise(ErrorKind::bad_format, context + ": truncated model file");
    if (line.rfind("gmr ", 0) == 0) {
        if (std::sscanf(line.c_str(), "gmr input=%d output=%d", &parsed.input_index,
                        &parsed.output_index) != 2)
            raise(ErrorKind::bad_format, context + ": bad regression header '" + line + "'");
        parsed.has_gmr = true;
        if (!std::getline(in, line)) raise(ErrorKind::bad_format, context + ": truncated model file");
    }

    int k = 0;
    int d = 0;
    {
        const auto tokens = detail::split_ws(line);
        if (tokens.size() != 2) raise(ErrorKind::bad_format, context + ": expected 'K D' line");
        k = static_cast<int>(detail::parse_17g(tokens[0], context));
        d = static_cast<int>(detail::parse_17g(tokens[1], context));
    }
    if (k < 1 || d < 1) raise(ErrorKind::bad_format, context + ": bad K or D");

    parsed.mixture.dim = d;
    for (int c = 0; c < k; ++c) {
        if (!std::getline(in, line))
            raise(ErrorKind::bad_format, context + ": expected " + std::to_string(k) + " components");
        const auto tokens = detail::split_ws(line);
        const std::size_t expect = 1 + static_cast<std::size_t>(d) + static_cast<std::size_t>(d) * d;
        if (tokens.size() != expect)
            raise(ErrorKind::bad_format,
                  context + ": component line has " + std::to_string(tokens.size()) + " fields, expected " +
                      std::to_string(expect));
        GaussianComponent comp;
        comp.pi = detail::parse_17g(tokens[0], context);
        comp.mu.resize(d);
        comp.sigma.resize(d, d);
        std::size_t t = 1;
        for (int i = 0; i < d; ++i) comp.mu[i] = detail::parse_17g(tokens[t++], context);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) comp.sigma(i, j) = detail::parse_17g(tokens[t++], context);
        parsed.mixture.components.push_back(std::move(comp));
    }
    return parsed;
}

inline void save_gmr_model(const std::filesystem::path& path, const GmrModel& model) {
    atomic_write_file(path, serialize_mixture(model.mixture, &model));
}

inline GmrModel load_gmr_model(const std::filesystem::path& path) {
    ParsedModel parsed = parse_mixture(read_file(path), path.string());
    if (!parsed.has_gmr)
        raise(ErrorKind::bad_format, path.string() + ": file does not store a regression model");
    return make_gmr_model(std::move(parsed.mixture), parsed.input_index, parsed.output_index);
}

// --- model bundle ------------------------------------------------------------
//
// A directory holding the three regression models as files `nominal`, `cw`
// and `ccw`, plus a `meta` file with `q_min`, `q_max` and `epsilon` lines.

struct ModelBundle {
    HysteresisModel model;
    double epsilon = 0.05;
};

inline void save_model_bundle(const std::filesystem::path& dir, const HysteresisModel& model,
                              double epsilon) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) raise(ErrorKind::io_failure, "cannot create directory '" + dir.string() + "'");
    save_gmr_model(dir / "nominal", model.nominal);
    save_gmr_model(dir / "cw", model.cw);
    save_gmr_model(dir / "ccw", model.ccw);
    std::ostringstream meta;
    meta << "q_min " << detail::format_17g(model.q_min) << '\n'
         << "q_max " << detail::format_17g(model.q_max) << '\n'
         << "epsilon " << detail::format_17g(epsilon) << '\n';
    atomic_write_file(dir / "meta", meta.str());
}

inline ModelBundle load_model_bundle(const std::filesystem::path& dir) {
    ModelBundle bundle;
    bundle.model.nominal = load_gmr_model(dir / "nominal");
    bundle.model.cw = load_gmr_model(dir / "cw");
    bundle.model.ccw = load_gmr_model(dir / "ccw");
    bundle.model.k_nominal = bundle.model.nominal.k();
    bundle.model.k_cw = bundle.model.cw.k();
    bundle.model.k_ccw = bundle.model.ccw.k();

    std::istringstream meta(read_file(dir / "meta"));
    std::string line;
    bool saw_min = false;
    bool saw_max = false;
    while (std::getline(meta, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto tokens = detail::split_ws(line);
        if (tokens.size() != 2) continue;
        const std::string context = (dir / "meta").string();
        if (tokens[0] == "q_min") {
            bundle.model.q_min = detail::parse_17g(tokens[1], context);
            saw_min = true;
        } else if (tokens[0] == "q_max") {
            bundle.model.q_max = detail::parse_17g(tokens[1], context);
            saw_max = true;
        } else if (tokens[0] == "epsilon") {
            bundle.epsilon = detail::parse_17g(tokens[1], context);
        }
    }
    if (!saw_min || !saw_max)
        raise(ErrorKind::bad_format, (dir / "meta").string() + ": missing q_min/q_max");
    // The bundle bounds are the training input range.
    for (GmrModel* m : {&bundle.model.nominal, &bundle.model.cw, &bundle.model.ccw}) {
        m->input_min = bundle.model.q_min;
        m->input_max = bundle.model.q_max;
    }
    return bundle;
}

}  // namespace hystkin
