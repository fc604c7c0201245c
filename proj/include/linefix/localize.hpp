#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace linefix::localize {

struct Diagnostic {
    std::string file_path;
    int line_no = 0;  // 1-based
    std::string message;

    bool operator==(const Diagnostic&) const = default;
};

struct TestRecord {
    std::string test_id;
    bool passed = false;
    std::vector<std::pair<std::string, int>> covered;  // (file, line)
};

struct CoverageMatrix {
    std::vector<TestRecord> tests;
};

enum class LocationSource { CompilerDiagnostic, Spectrum };

struct SuspiciousLocation {
    std::string file_path;
    int line_no = 0;
    double score = 0.0;  // in [0, 1]
    LocationSource source = LocationSource::Spectrum;

    bool operator==(const SuspiciousLocation&) const = default;
};

class NoFailingTests : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NoLocationsFound : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Patterns are regexes with named groups (?<path>...) and (?<line>...).
// The default set covers "path:line:" style compiler output.
const std::vector<std::string>& default_diagnostic_patterns();

// One Diagnostic per match in log order, deduplicated by (file, line).
// No matches is not an error: the caller falls through to the spectrum path.
std::vector<Diagnostic> parse_diagnostics(const std::string& build_log,
                                          const std::vector<std::string>& patterns =
                                              default_diagnostic_patterns());

enum class SpectrumFormula { Ochiai, Tarantula };

// score(line) = ef / sqrt((ef+nf)(ef+ep)); lines covered by no failing
// test are omitted. Sorted by score descending, ties by (path, line).
std::vector<SuspiciousLocation> ochiai_rank(const CoverageMatrix& cov);

std::vector<SuspiciousLocation> spectrum_rank(const CoverageMatrix& cov, SpectrumFormula formula);

struct FailureEvidence {
    bool compile_failed = false;
    bool tests_failed = false;
    std::string build_log;
};

// Compiler diagnostics (score 1.0) first, then spectrum ranking when test
// failures and coverage exist; at most `limit` locations.
std::vector<SuspiciousLocation> localize(const FailureEvidence& failure,
                                         const std::optional<CoverageMatrix>& cov,
                                         int limit = 10,
                                         const std::vector<std::string>& patterns =
                                             default_diagnostic_patterns(),
                                         SpectrumFormula formula = SpectrumFormula::Ochiai);

// JSON Lines, one test per record: {test_id, status: "pass"|"fail",
// covered: [{file, line}, ...]}.
CoverageMatrix read_coverage_jsonl(const std::filesystem::path& path);

}  // namespace linefix::localize
