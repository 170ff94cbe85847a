#include <gtest/gtest.h>

#include "harvestkit/validator/validator.hpp"
#include "support.hpp"

using namespace harvestkit;
using namespace harvestkit::testing;
using client::FailureCategory;
using sim::FaultKind;
using validator::Verdict;

namespace {

validator::ValidationReport run(SimHarness& h, std::uint64_t seed = 1) {
    auto c = h.client();
    ManualClock clock(h.provider.now());
    return validator::validate_provider(c, h.provider.scenario().base_url, clock, {.seed = seed});
}

sim::SimScenario with_deletes(std::size_t records) {
    auto s = scenario(records);
    s.timeline.push_back({t0() + days(1), sim::SimEvent::Op::Delete, "oai:sim.example.org:3", {}, {}});
    s.timeline.push_back({t0() + days(1) + Seconds{5}, sim::SimEvent::Op::Delete, "oai:sim.example.org:7", {}, {}});
    return s;
}

const validator::CheckResult& check(const validator::ValidationReport& r, std::string_view id) {
    const auto* c = r.find(id);
    EXPECT_NE(c, nullptr) << id;
    static const validator::CheckResult missing;
    return c ? *c : missing;
}

}  // namespace

TEST(Validator, CleanProviderPassesAllChecks) {
    SimHarness h(with_deletes(45));
    h.provider.advance(t0() + days(2));
    auto report = run(h);
    EXPECT_EQ(report.verdict, Verdict::Pass) << validator::report_to_json(report);
    std::size_t errors = 0;
    for (const auto& c : report.checks)
        if (c.severity == validator::Severity::Error) {
            ++errors;
            EXPECT_TRUE(c.passed) << c.check_id << ": " << c.evidence;
        }
    EXPECT_EQ(errors, 8u);
}

TEST(Validator, OverlongUtf8FailsWithOffset) {
    auto s = scenario(25);
    s.faults.push_back(fault_on_page(FaultKind::InvalidUtf8, 1));
    SimHarness h(s);
    h.provider.advance(t0() + days(1));
    auto report = run(h);
    EXPECT_EQ(report.verdict, Verdict::Fail);
    const auto& c = check(report, validator::kCheckUtf8);
    EXPECT_FALSE(c.passed);
    EXPECT_EQ(c.category, FailureCategory::DataFormat);
    EXPECT_NE(c.evidence.find("byte offset"), std::string::npos);
    EXPECT_NE(c.evidence.find("0xC0 0x80"), std::string::npos);
}

TEST(Validator, NonIdempotentWindowFailsIdempotency) {
    auto s = scenario(25);
    s.faults.push_back(fault(FaultKind::NonIdempotentWindow));
    SimHarness h(s);
    h.provider.advance(t0() + days(1));
    auto report = run(h);
    const auto& c = check(report, validator::kCheckIdempotency);
    EXPECT_FALSE(c.passed);
    EXPECT_EQ(c.category, FailureCategory::ProtocolViolation);
    EXPECT_FALSE(c.evidence.empty());
}

TEST(Validator, BrokenTokenFailsTokenCheck) {
    auto s = scenario(25);
    s.faults.push_back(fault(FaultKind::BrokenToken));
    SimHarness h(s);
    h.provider.advance(t0() + days(1));
    auto report = run(h);
    const auto& c = check(report, validator::kCheckResumptionToken);
    EXPECT_FALSE(c.passed);
    EXPECT_EQ(c.category, FailureCategory::ProtocolViolation);
}

TEST(Validator, WrongDatestampFailsDatestampCheck) {
    auto s = scenario(5);
    s.faults.push_back(fault(FaultKind::WrongDatestamp));
    SimHarness h(s);
    h.provider.advance(t0() + days(1));
    auto report = run(h);
    const auto& c = check(report, validator::kCheckDatestamp);
    EXPECT_FALSE(c.passed);
    EXPECT_EQ(c.category, FailureCategory::DataFormat);
}

TEST(Validator, SchemaInvalidRecordFailsSchemaCheck) {
    auto s = scenario(5);
    s.faults.push_back(fault(FaultKind::SchemaInvalidRecord));
    SimHarness h(s);
    h.provider.advance(t0() + days(1));
    auto report = run(h);
    const auto& c = check(report, validator::kCheckSchema);
    EXPECT_FALSE(c.passed);
    EXPECT_EQ(c.category, FailureCategory::DataFormat);
}

TEST(Validator, ForgottenDeletesFailDeletedPolicy) {
    auto s = with_deletes(20);
    s.faults.push_back(fault(FaultKind::ForgottenDeletes));
    SimHarness h(s);
    h.provider.advance(t0() + days(2));
    auto report = run(h);
    const auto& c = check(report, validator::kCheckDeletedPolicy);
    EXPECT_FALSE(c.passed);
    EXPECT_EQ(c.category, FailureCategory::ProtocolViolation);
}

TEST(Validator, UnreachableProviderIsSingleTransientFailure) {
    SimHarness h(scenario(1));
    auto c = h.client();
    ManualClock clock(t0());
    auto report = validator::validate_provider(c, "http://down.example.org/oai", clock);
    ASSERT_EQ(report.checks.size(), 1u);
    EXPECT_EQ(report.verdict, Verdict::Fail);
    EXPECT_EQ(report.checks[0].category, FailureCategory::Transient);
    EXPECT_FALSE(report.checks[0].evidence.empty());
}

TEST(Validator, DayGranularityIsOnlyAWarning) {
    auto s = scenario(15);
    s.granularity = oai::Granularity::Day;
    SimHarness h(s);
    h.provider.advance(t0() + days(1));
    auto report = run(h);
    EXPECT_EQ(report.verdict, Verdict::Pass) << validator::report_to_json(report);
    EXPECT_FALSE(check(report, validator::kCheckGranularity).passed);
    EXPECT_EQ(check(report, validator::kCheckGranularity).severity, validator::Severity::Warning);
}

TEST(Validator, DeterministicOnFrozenProvider) {
    SimHarness h(with_deletes(60));
    h.provider.advance(t0() + days(2));
    auto a = run(h, 9);
    auto b = run(h, 9);
    EXPECT_EQ(a.checks, b.checks);
    EXPECT_EQ(a.verdict, b.verdict);
}

TEST(Validator, ReportJsonRoundTrip) {
    auto s = scenario(25);
    s.faults.push_back(fault(FaultKind::BrokenToken));
    SimHarness h(s);
    h.provider.advance(t0() + days(1));
    auto report = run(h);
    auto back = validator::report_from_json(validator::report_to_json(report));
    EXPECT_EQ(back.checks, report.checks);
    EXPECT_EQ(back.verdict, report.verdict);
    EXPECT_EQ(back.generated_at, report.generated_at);
    EXPECT_EQ(back.provider, report.provider);
}

namespace {

std::string record_xml(std::string_view datestamp, std::string_view identifier_value) {
    return "<record><header><identifier>oai:x:1</identifier><datestamp>" + std::string(datestamp) +
           "</datestamp></header><metadata><oai_dc:dc xmlns:oai_dc=\"http://www.openarchives.org/OAI/2.0/oai_dc/\" "
           "xmlns:dc=\"http://purl.org/dc/elements/1.1/\"><dc:title>T</dc:title><dc:identifier>" +
           std::string(identifier_value) + "</dc:identifier></oai_dc:dc></metadata></record>";
}

}  // namespace

TEST(CheckRecord, CleanRecordHasNoFindings) {
    EXPECT_TRUE(validator::check_record(record_xml("2005-08-01T00:00:00Z", "http://example.org/a"), "oai_dc").empty());
}

TEST(CheckRecord, UnescapedAmpersandIsOneEncodingError) {
    auto findings = validator::check_record(record_xml("2005-08-01T00:00:00Z", "http://example.org/?a=1&b=2"), "oai_dc");
    ASSERT_EQ(findings.size(), 1u);
    EXPECT_EQ(findings[0].check_id, validator::kCheckEncoding);
    EXPECT_EQ(findings[0].severity, validator::Severity::Error);
    EXPECT_EQ(findings[0].category, FailureCategory::DataFormat);
}

TEST(CheckRecord, DayFirstDatestampIsOneDatestampError) {
    auto findings = validator::check_record(record_xml("01-08-2005", "http://example.org/a"), "oai_dc");
    ASSERT_EQ(findings.size(), 1u);
    EXPECT_EQ(findings[0].check_id, validator::kCheckDatestamp);
}

TEST(CheckRecord, UnencodedSpaceInUrlIsEncodingError) {
    auto findings = validator::check_record(record_xml("2005-08-01T00:00:00Z", "http://example.org/a b.pdf"), "oai_dc");
    ASSERT_EQ(findings.size(), 1u);
    EXPECT_EQ(findings[0].check_id, validator::kCheckEncoding);
}

TEST(CheckRecord, InvalidUtf8ReportsOffset) {
    auto findings = validator::check_record(record_xml("2005-08-01T00:00:00Z", "http://x/\xC0\x80"), "oai_dc");
    ASSERT_EQ(findings.size(), 1u);
    EXPECT_EQ(findings[0].check_id, validator::kCheckUtf8);
    EXPECT_NE(findings[0].evidence.find("byte offset"), std::string::npos);
}
