#include "linefix/localize.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <regex>
#include <set>

#include <nlohmann/json.hpp>

#include "linefix/textutil.hpp"

namespace linefix::localize {

namespace {

// std::regex has no named-group support, so (?<name>...) is rewritten to a
// plain group while recording which capture index each name landed on.
// Unnamed user groups keep their indices.
struct CompiledPattern {
    std::regex re;
    int path_group = -1;
    int line_group = -1;
};

CompiledPattern compile_pattern(const std::string& pattern) {
    std::string rewritten;
    rewritten.reserve(pattern.size());
    int group_index = 0;
    int path_group = -1;
    int line_group = -1;
    for (std::size_t i = 0; i < pattern.size(); ++i) {
        if (pattern[i] == '\\' && i + 1 < pattern.size()) {
            rewritten += pattern[i];
            rewritten += pattern[i + 1];
            ++i;
            continue;
        }
        if (pattern[i] != '(') {
            rewritten += pattern[i];
            continue;
        }
        if (i + 2 < pattern.size() && pattern[i + 1] == '?' && pattern[i + 2] == '<') {
            std::size_t close = pattern.find('>', i + 3);
            if (close == std::string::npos) {
                throw std::invalid_argument("unterminated named group in pattern: " + pattern);
            }
            std::string name = pattern.substr(i + 3, close - i - 3);
            ++group_index;
            if (name == "path") {
                path_group = group_index;
            } else if (name == "line") {
                line_group = group_index;
            }
            rewritten += '(';
            i = close;
            continue;
        }
        if (i + 1 < pattern.size() && pattern[i + 1] == '?') {
            rewritten += '(';  // non-capturing or assertion, keeps no index
            continue;
        }
        ++group_index;
        rewritten += '(';
    }
    if (path_group < 0 || line_group < 0) {
        throw std::invalid_argument("diagnostic pattern needs (?<path>...) and (?<line>...): " +
                                    pattern);
    }
    return {std::regex(rewritten), path_group, line_group};
}

}  // namespace

const std::vector<std::string>& default_diagnostic_patterns() {
    static const std::vector<std::string> patterns = {
        R"((?<path>[A-Za-z0-9_./\\-]+):(?<line>[0-9]+)(?::[0-9]+)?:)",
    };
    return patterns;
}

std::vector<Diagnostic> parse_diagnostics(const std::string& build_log,
                                          const std::vector<std::string>& patterns) {
    std::vector<CompiledPattern> compiled;
    compiled.reserve(patterns.size());
    for (const auto& p : patterns) compiled.push_back(compile_pattern(p));

    std::vector<Diagnostic> diagnostics;
    std::set<std::pair<std::string, int>> seen;
    for (const auto& line : split_lines(build_log)) {
        for (const auto& pattern : compiled) {
            std::smatch m;
            if (!std::regex_search(line, m, pattern.re)) continue;
            Diagnostic d;
            d.file_path = m[static_cast<std::size_t>(pattern.path_group)].str();
            d.line_no = std::stoi(m[static_cast<std::size_t>(pattern.line_group)].str());
            d.message = line;
            if (d.line_no >= 1 && seen.emplace(d.file_path, d.line_no).second) {
                diagnostics.push_back(std::move(d));
            }
            break;  // first matching pattern wins for this line
        }
    }
    return diagnostics;
}

std::vector<SuspiciousLocation> spectrum_rank(const CoverageMatrix& cov,
                                              SpectrumFormula formula) {
    long total_failing = 0;
    long total_passing = 0;
    for (const auto& t : cov.tests) {
        (t.passed ? total_passing : total_failing)++;
    }
    if (total_failing == 0) {
        throw NoFailingTests("spectrum ranking needs at least one failing test");
    }

    std::map<std::pair<std::string, int>, std::pair<long, long>> counts;  // (ef, ep)
    for (const auto& t : cov.tests) {
        std::set<std::pair<std::string, int>> distinct(t.covered.begin(), t.covered.end());
        for (const auto& loc : distinct) {
            auto& c = counts[loc];
            (t.passed ? c.second : c.first)++;
        }
    }

    std::vector<SuspiciousLocation> out;
    for (const auto& [loc, c] : counts) {
        const auto [ef, ep] = c;
        if (ef == 0) continue;
        const long nf = total_failing - ef;
        double score = 0.0;
        if (formula == SpectrumFormula::Ochiai) {
            score = static_cast<double>(ef) /
                    std::sqrt(static_cast<double>(ef + nf) * static_cast<double>(ef + ep));
        } else {
            const double fail_frac = static_cast<double>(ef) / static_cast<double>(total_failing);
            const double pass_frac =
                total_passing == 0 ? 0.0
                                   : static_cast<double>(ep) / static_cast<double>(total_passing);
            score = fail_frac / (fail_frac + pass_frac);
        }
        out.push_back({loc.first, loc.second, score, LocationSource::Spectrum});
    }
    std::sort(out.begin(), out.end(), [](const SuspiciousLocation& a, const SuspiciousLocation& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.file_path != b.file_path) return a.file_path < b.file_path;
        return a.line_no < b.line_no;
    });
    return out;
}

std::vector<SuspiciousLocation> ochiai_rank(const CoverageMatrix& cov) {
    return spectrum_rank(cov, SpectrumFormula::Ochiai);
}

std::vector<SuspiciousLocation> localize(const FailureEvidence& failure,
                                         const std::optional<CoverageMatrix>& cov, int limit,
                                         const std::vector<std::string>& patterns,
                                         SpectrumFormula formula) {
    if (!failure.compile_failed && !failure.tests_failed) {
        throw std::invalid_argument("localize called on a build that is not failing");
    }
    std::vector<SuspiciousLocation> out;
    std::set<std::pair<std::string, int>> seen;
    if (failure.compile_failed) {
        for (const auto& d : parse_diagnostics(failure.build_log, patterns)) {
            if (seen.emplace(d.file_path, d.line_no).second) {
                out.push_back({d.file_path, d.line_no, 1.0, LocationSource::CompilerDiagnostic});
            }
        }
    }
    if (failure.tests_failed && cov && !cov->tests.empty()) {
        for (const auto& loc : spectrum_rank(*cov, formula)) {
            if (seen.emplace(loc.file_path, loc.line_no).second) {
                out.push_back(loc);
            }
        }
    }
    if (out.empty()) {
        throw NoLocationsFound("neither diagnostics nor spectrum produced a location");
    }
    if (out.size() > static_cast<std::size_t>(limit)) {
        out.resize(static_cast<std::size_t>(limit));
    }
    return out;
}

CoverageMatrix read_coverage_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read coverage file: " + path.string());
    CoverageMatrix cov;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        TestRecord rec;
        rec.test_id = j.at("test_id").get<std::string>();
        rec.passed = j.at("status").get<std::string>() == "pass";
        for (const auto& c : j.at("covered")) {
            rec.covered.emplace_back(c.at("file").get<std::string>(), c.at("line").get<int>());
        }
        cov.tests.push_back(std::move(rec));
    }
    return cov;
}

}  // namespace linefix::localize
