#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "harvestkit/client/client.hpp"
#include "harvestkit/oai/model.hpp"
#include "harvestkit/time.hpp"

namespace harvestkit::validator {

// Stable check identifiers. The first eight are Errors.
inline constexpr std::string_view kCheckIdentify = "identify";
inline constexpr std::string_view kCheckUtf8 = "utf8";
inline constexpr std::string_view kCheckSchema = "schema";
inline constexpr std::string_view kCheckDatestamp = "datestamp";
inline constexpr std::string_view kCheckResumptionToken = "resumption-token";
inline constexpr std::string_view kCheckIdempotency = "idempotency";
inline constexpr std::string_view kCheckEncoding = "encoding";
inline constexpr std::string_view kCheckDeletedPolicy = "deleted-policy";
// Warnings.
inline constexpr std::string_view kCheckIdentifyOptional = "identify-optional";
inline constexpr std::string_view kCheckGranularity = "granularity";
inline constexpr std::string_view kCheckAbout = "about";

enum class Severity { Error, Warning };
enum class Verdict { Pass, Fail };

std::string_view to_string(Severity s);
std::string_view to_string(Verdict v);

struct CheckResult {
    std::string check_id;
    Severity severity = Severity::Error;
    bool passed = true;
    client::FailureCategory category = client::FailureCategory::DataFormat;
    std::string evidence;

    bool operator==(const CheckResult&) const = default;
};

struct ValidationReport {
    std::string provider;
    std::vector<CheckResult> checks;
    Verdict verdict = Verdict::Fail;
    Instant generated_at{};

    std::size_t error_count() const;
    const CheckResult* find(std::string_view check_id) const;
    /// Failed Error-severity checks.
    std::vector<const CheckResult*> failures() const;
};

inline constexpr int kReportSchemaVersion = 1;

std::string report_to_json(const ValidationReport& report, int indent = 2);
ValidationReport report_from_json(std::string_view json_text);

struct ValidatorOptions {
    std::string format_prefix = "oai_dc";
    std::uint64_t seed = 1;               // picks the random sample page
    std::size_t deleted_probe_limit = 3;  // GetRecord probes for deleted headers
};

/// Runs the full check suite against a live provider.
ValidationReport validate_provider(client::OaiClient& client, const std::string& base_url, const Clock& clock,
                                   const ValidatorOptions& options = {});

/// Record-level checks (utf8, schema, datestamp, encoding) on one standalone
/// <record> element. Only failures are returned; empty means clean.
std::vector<CheckResult> check_record(std::string_view record_xml, std::string_view format_prefix,
                                      const oai::DcProfile& profile = oai::DcProfile::standard());

}  // namespace harvestkit::validator
