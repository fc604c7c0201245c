#pragma once

#include <array>
#include <filesystem>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace linefix::ods {

enum class EditCategory {
    ReturnExprUpdate,
    MethodInvocationUpdate,
    AssignmentUpdate,
    IfConditionUpdate,
    TryRemoval,
    Other,
};

const char* edit_category_name(EditCategory c);

// Static signals of a one-line patch; layout version 1 is one-hot category
// (6) followed by six scalar similarity/shape features.
struct PatchFeatures {
    static constexpr int kLayoutVersion = 1;
    static constexpr int kDimensions = 12;

    EditCategory edit_category = EditCategory::Other;
    double token_jaccard = 0.0;       // [0,1] over token multisets
    double norm_edit_distance = 0.0;  // [0,1] token-level Levenshtein
    double length_delta_ratio = 0.0;  // (|patched|-|buggy|)/max(|buggy|,1)
    bool introduces_new_literal = false;
    bool reuses_in_scope_identifier = false;
    bool removes_code_only = false;

    std::array<double, kDimensions> to_vector() const;

    bool operator==(const PatchFeatures&) const = default;
};

enum class Label { Correct, Overfitting };
enum class Provenance { Human, Machine };

struct LabeledPatch {
    PatchFeatures features;
    Label label = Label::Correct;
    Provenance provenance = Provenance::Human;
};

enum class OdsVerdict { Keep, Discard };

struct OdsModel {
    int feature_layout_version = PatchFeatures::kLayoutVersion;
    std::vector<double> weights;  // aligned with PatchFeatures::to_vector
    double bias = 0.0;
    double threshold = 0.5;
};

class DegenerateData : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class LayoutMismatch : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

PatchFeatures extract_features(const std::string& buggy_line, const std::string& patched_line,
                               const std::vector<std::string>& context,
                               const std::set<std::string>& scope_identifiers);

// Logistic regression (Overfitting = positive class) fit by full-batch
// gradient descent on cross-entropy + l2*||w||^2, inverse-frequency sample
// weights against class imbalance. Deterministic for a fixed data order.
OdsModel train_ods(const std::vector<LabeledPatch>& data, int epochs, double lr, double l2,
                   double* train_accuracy = nullptr);

// p = sigmoid(w.x + b); Discard when p >= threshold.
std::pair<double, OdsVerdict> classify(const OdsModel& model, const PatchFeatures& features);

nlohmann::json model_to_json(const OdsModel& model);
OdsModel model_from_json(const nlohmann::json& j);
void save_model(const OdsModel& model, const std::filesystem::path& path);
OdsModel load_model(const std::filesystem::path& path);

nlohmann::json labeled_patch_to_json(const LabeledPatch& patch);
LabeledPatch labeled_patch_from_json(const nlohmann::json& j);

// Every identifier-shaped token in the given lines; feeds the
// reuses_in_scope_identifier feature.
std::set<std::string> collect_identifiers(const std::vector<std::string>& lines);

// Synthetic labeled line pairs (n per class): small in-scope identifier
// substitutions labeled Correct, degenerate rewrites labeled Overfitting.
// Deterministic; doubles as the bootstrap training corpus when no trained
// model file is configured.
std::vector<LabeledPatch> bootstrap_corpus(int n_per_class);

OdsModel bootstrap_model();

}  // namespace linefix::ods
