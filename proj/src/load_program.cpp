#include "nimh/load_program.hpp"

#include <numeric>

#include "nimh/errors.hpp"
#include "text_util.hpp"

namespace nimh {

std::uint64_t LoadProgram::cycle_ms() const {
    std::uint64_t total = 0;
    for (const auto& s : steps)
        total += s.duration_ms;
    return total;
}

std::uint8_t LoadProgram::level_at(std::uint64_t t_ms) const {
    const std::uint64_t period = cycle_ms();
    if (period == 0)
        throw DomainError("load program has zero cycle length");
    std::uint64_t r = t_ms % period;
    for (const auto& s : steps) {
        if (r < s.duration_ms)
            return s.level;
        r -= s.duration_ms;
    }
    return steps.back().level;  // unreachable: r < period by construction
}

void validate_program(const LoadProgram& prog) {
    if (prog.steps.empty())
        throw DomainError("load program has no steps");
    for (std::size_t i = 0; i < prog.steps.size(); ++i)
        if (prog.steps[i].duration_ms == 0)
            throw DomainError("load program step " + std::to_string(i) + " has zero duration");
}

CycleStats cycle_stats(const LoadProgram& prog) {
    validate_program(prog);
    CycleStats st;
    st.period_ms = prog.cycle_ms();
    std::uint64_t active_ms = 0;
    double level_ms = 0.0;  // level-weighted milliseconds
    for (const auto& s : prog.steps) {
        if (s.level > 0)
            active_ms += s.duration_ms;
        level_ms += static_cast<double>(s.level) * static_cast<double>(s.duration_ms);
        st.peak_level = std::max(st.peak_level, s.level);
    }
    st.duty = static_cast<double>(active_ms) / static_cast<double>(st.period_ms);
    st.mean_level = level_ms / static_cast<double>(st.period_ms);
    return st;
}

LoadProgram parse_program_text(const std::string& text) {
    LoadProgram prog;
    bool unit_seen = false;
    std::size_t lineno = 0;
    for (std::string_view raw : detail::split_lines(text)) {
        ++lineno;
        std::string_view line = detail::trim(raw);
        if (line.empty() || line.front() == '#')
            continue;

        const auto sp = line.find_first_of(" \t");
        std::string_view head = line.substr(0, sp);
        std::string_view rest = sp == std::string_view::npos ? std::string_view{}
                                                             : detail::trim(line.substr(sp));
        if (head == "unit") {
            if (unit_seen)
                throw ParseError("duplicate unit line", lineno);
            if (rest == "mw")
                prog.unit = LoadUnit::MilliWatt;
            else if (rest == "ma")
                prog.unit = LoadUnit::MilliAmp;
            else
                throw ParseError("unit must be 'mw' or 'ma'", lineno);
            unit_seen = true;
        } else if (head == "step") {
            if (!unit_seen)
                throw ParseError("step before unit line", lineno);
            const auto sp2 = rest.find_first_of(" \t");
            if (sp2 == std::string_view::npos)
                throw ParseError("step needs '<duration_ms> <level>'", lineno);
            std::uint64_t dur = 0;
            std::uint32_t level = 0;
            if (!detail::parse_number(rest.substr(0, sp2), dur) || dur == 0)
                throw ParseError("step duration must be a positive integer", lineno);
            if (dur > 0xFFFFFFFFull)
                throw ParseError("step duration out of range", lineno);
            if (!detail::parse_number(rest.substr(sp2), level) || level > 255)
                throw ParseError("step level must be an integer 0..255", lineno);
            prog.steps.push_back({static_cast<std::uint32_t>(dur),
                                  static_cast<std::uint8_t>(level)});
        } else {
            throw ParseError("unknown directive '" + std::string(head) + "'", lineno);
        }
    }
    if (!unit_seen)
        throw ParseError("missing unit line");
    if (prog.steps.empty())
        throw ParseError("program has no steps");
    return prog;
}

std::string serialize_program(const LoadProgram& prog) {
    validate_program(prog);
    std::string out = prog.unit == LoadUnit::MilliWatt ? "unit mw\n" : "unit ma\n";
    for (const auto& s : prog.steps) {
        out += "step ";
        out += std::to_string(s.duration_ms);
        out += ' ';
        out += std::to_string(s.level);
        out += '\n';
    }
    return out;
}

} // namespace nimh
