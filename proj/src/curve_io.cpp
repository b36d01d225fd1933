#include "nimh/curve_io.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include "nimh/errors.hpp"
#include "text_util.hpp"

namespace nimh {

namespace {

constexpr const char* kHeaderNoCurrent = "time_s,voltage_mv";
constexpr const char* kHeaderCurrent = "time_s,voltage_mv,current_ma";

void append_meta(std::string& out, const CurveMeta& meta) {
    if (meta.label)
        out += "# label=" + *meta.label + "\n";
    if (meta.load_ma)
        out += "# load_ma=" + detail::fmt_full(*meta.load_ma) + "\n";
    if (meta.period_s)
        out += "# period_s=" + detail::fmt_full(*meta.period_s) + "\n";
    if (meta.duty)
        out += "# duty=" + detail::fmt_full(*meta.duty) + "\n";
    if (meta.temp_c)
        out += "# temp_c=" + detail::fmt_full(*meta.temp_c) + "\n";
}

// `# key=value` comments carry metadata; anything else after '#' is noise.
void apply_meta_comment(CurveMeta& meta, std::string_view body, std::size_t lineno) {
    const auto eq = body.find('=');
    if (eq == std::string_view::npos)
        return;
    const std::string_view key = detail::trim(body.substr(0, eq));
    const std::string_view val = detail::trim(body.substr(eq + 1));
    if (key == "label") {
        meta.label = std::string(val);
        return;
    }
    double num = 0.0;
    if (key == "load_ma" || key == "period_s" || key == "duty" || key == "temp_c") {
        if (!detail::parse_number(val, num))
            throw ParseError("bad numeric metadata for '" + std::string(key) + "'", lineno);
        if (key == "load_ma")
            meta.load_ma = num;
        else if (key == "period_s")
            meta.period_s = num;
        else if (key == "duty")
            meta.duty = num;
        else
            meta.temp_c = num;
    }
    // unknown keys: plain comment, ignored
}

} // namespace

std::string format_curve_csv(const DischargeCurve& curve) {
    // Structural checks only: derivative records carry negative values in the
    // voltage column and must still be writable.
    const std::size_t n = curve.time_s.size();
    if (n == 0)
        throw DomainError("cannot format an empty curve");
    if (curve.voltage_v.size() != n ||
        (!curve.current_ma.empty() && curve.current_ma.size() != n))
        throw DomainError("curve column size mismatch");
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(curve.time_s[i]) || !std::isfinite(curve.voltage_v[i]))
            throw DomainError("curve has a non-finite sample");
        if (i > 0 && !(curve.time_s[i] > curve.time_s[i - 1]))
            throw DomainError("curve time not strictly increasing");
    }
    std::string out;
    append_meta(out, curve.meta);
    out += curve.has_current() ? kHeaderCurrent : kHeaderNoCurrent;
    out += '\n';
    for (std::size_t i = 0; i < curve.size(); ++i) {
        out += detail::fmt_fixed(curve.time_s[i], 6);
        out += ',';
        out += detail::fmt_fixed(curve.voltage_v[i] * 1000.0, 3);
        if (curve.has_current()) {
            out += ',';
            out += detail::fmt_fixed(curve.current_ma[i], 3);
        }
        out += '\n';
    }
    return out;
}

DischargeCurve parse_curve_csv(const std::string& text) {
    DischargeCurve curve;
    bool header_seen = false;
    bool with_current = false;

    std::size_t lineno = 0;
    for (std::string_view raw : detail::split_lines(text)) {
        ++lineno;
        const std::string_view line = detail::trim(raw);
        if (line.empty())
            continue;
        if (line.front() == '#') {
            if (!header_seen)
                apply_meta_comment(curve.meta, line.substr(1), lineno);
            continue;
        }
        if (!header_seen) {
            if (line == kHeaderCurrent)
                with_current = true;
            else if (line == kHeaderNoCurrent)
                with_current = false;
            else
                throw ParseError("unrecognized curve header", lineno);
            header_seen = true;
            continue;
        }

        // data row
        std::array<std::string_view, 3> fields;
        std::size_t nf = 0;
        std::size_t pos = 0;
        while (true) {
            const auto comma = line.find(',', pos);
            if (nf >= fields.size())
                throw ParseError("too many columns", lineno);
            fields[nf++] = line.substr(pos, comma == std::string_view::npos
                                                ? std::string_view::npos
                                                : comma - pos);
            if (comma == std::string_view::npos)
                break;
            pos = comma + 1;
        }
        const std::size_t want = with_current ? 3u : 2u;
        if (nf != want)
            throw ParseError("expected " + std::to_string(want) + " columns", lineno);

        double t = 0.0, mv = 0.0, ma = 0.0;
        if (!detail::parse_number(fields[0], t))
            throw ParseError("bad time value", lineno);
        if (!detail::parse_number(fields[1], mv))
            throw ParseError("bad voltage value", lineno);
        if (with_current && !detail::parse_number(fields[2], ma))
            throw ParseError("bad current value", lineno);

        if (!curve.time_s.empty() && !(t > curve.time_s.back()))
            throw ParseError("time not strictly increasing", lineno);
        if (!std::isfinite(mv) || mv < 0.0)
            throw ParseError("voltage must be finite and non-negative", lineno);

        curve.time_s.push_back(t);
        curve.voltage_v.push_back(mv / 1000.0);
        if (with_current)
            curve.current_ma.push_back(ma);
    }
    if (!header_seen)
        throw ParseError("curve file has no header line");
    if (curve.time_s.empty())
        throw ParseError("curve file has no samples");
    validate_curve(curve);
    return curve;
}

std::string format_params(const ModelParams& params) {
    std::string out;
    for (std::size_t i = 0; i < 6; ++i) {
        out += kParamKeys[i];
        out += '=';
        out += detail::fmt_full(param_value(params, i));
        out += '\n';
    }
    return out;
}

ModelParams parse_params_text(const std::string& text) {
    ModelParams params;
    std::array<bool, 6> seen{};
    std::size_t lineno = 0;
    for (std::string_view raw : detail::split_lines(text)) {
        ++lineno;
        const std::string_view line = detail::trim(raw);
        if (line.empty() || line.front() == '#')
            continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ParseError("expected KEY=value", lineno);
        const std::string_view key = detail::trim(line.substr(0, eq));
        std::size_t idx = 6;
        for (std::size_t i = 0; i < 6; ++i)
            if (key == kParamKeys[i])
                idx = i;
        if (idx == 6)
            throw ParseError("unknown parameter key '" + std::string(key) + "'", lineno);
        if (seen[idx])
            throw ParseError("duplicate parameter key '" + std::string(key) + "'", lineno);
        double v = 0.0;
        if (!detail::parse_number(line.substr(eq + 1), v))
            throw ParseError("bad parameter value", lineno);
        param_ref(params, idx) = v;
        seen[idx] = true;
    }
    return params;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ParseError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad())
        throw ParseError("read failed for '" + path + "'");
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw ParseError("cannot open '" + path + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out)
        throw ParseError("write failed for '" + path + "'");
}

DischargeCurve load_curve(const std::string& path) {
    try {
        return parse_curve_csv(read_text_file(path));
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what());
    }
}

void save_curve(const std::string& path, const DischargeCurve& curve) {
    write_text_file(path, format_curve_csv(curve));
}

ModelParams load_params(const std::string& path) {
    try {
        return parse_params_text(read_text_file(path));
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what());
    }
}

void save_params(const std::string& path, const ModelParams& params) {
    write_text_file(path, format_params(params));
}

} // namespace nimh
