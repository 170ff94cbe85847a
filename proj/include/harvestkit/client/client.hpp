#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "harvestkit/expected.hpp"
#include "harvestkit/net.hpp"
#include "harvestkit/oai/model.hpp"
#include "harvestkit/oai/protocol.hpp"
#include "harvestkit/time.hpp"

namespace harvestkit::client {

enum class FailureCategory { Transient, ProtocolViolation, DataFormat };

std::string_view to_string(FailureCategory c);
std::optional<FailureCategory> parse_failure_category(std::string_view s);

struct Failure {
    FailureCategory category;
    std::string detail;
    std::string url;
    std::optional<std::size_t> offset;  // byte offset into the response body
    int http_status = 0;
    std::vector<oai::ProtocolError> protocol_errors;
};

FailureCategory classify_failure(const net::TransportError& e);
/// For non-200 answers.
FailureCategory classify_failure(int http_status);
FailureCategory classify_failure(const oai::ResponseError& e);

struct ProviderInfo {
    std::string base_url;
    std::string repository_name;
    oai::DeletedPolicy deleted_policy = oai::DeletedPolicy::No;
    Instant earliest_datestamp{};
    oai::Granularity granularity = oai::Granularity::Second;
    Instant response_date{};
};

class Sleeper {
public:
    virtual ~Sleeper() = default;
    virtual void sleep(Seconds d) = 0;
};

class ThreadSleeper final : public Sleeper {
public:
    void sleep(Seconds d) override;
};

/// Records requested delays without waiting.
class RecordingSleeper final : public Sleeper {
public:
    void sleep(Seconds d) override { delays.push_back(d); }
    std::vector<Seconds> delays;
};

struct RetryPolicy {
    int max_retries = 3;
    Seconds base{30};  // delay before retry n is base * 2^(n-1)
};

struct ClientOptions {
    RetryPolicy retry;
    Sleeper* sleeper = nullptr;  // null: ThreadSleeper
    oai::DcProfile profile = oai::DcProfile::standard();
    std::size_t max_pages = 1'000'000;
};

struct HarvestTarget {
    std::string base_url;
    std::string format_prefix = "oai_dc";
    std::string set;
    oai::Granularity granularity = oai::Granularity::Second;
};

struct HarvestMode {
    enum class Kind { Full, Incremental };
    Kind kind = Kind::Full;
    std::optional<Instant> since;

    static HarvestMode full() { return {}; }
    static HarvestMode incremental(Instant since) { return {Kind::Incremental, since}; }
};

struct HarvestResult {
    std::vector<oai::MetadataRecord> records;
    std::size_t pages_fetched = 0;
    std::optional<Failure> failure;  // unset on success
    std::optional<Instant> completed_through;
    std::size_t duplicates_dropped = 0;
    std::vector<std::string> log;

    bool ok() const noexcept { return !failure.has_value(); }
    std::string failure_detail() const { return failure ? failure->detail : std::string{}; }
};

struct IdentifiersResult {
    std::vector<oai::RecordHeader> headers;
    std::size_t pages_fetched = 0;
    std::optional<Failure> failure;
    std::optional<Instant> completed_through;
};

/// Protocol harvester. Stateless between calls; one instance may serve
/// concurrent harvests if the transport allows it.
class OaiClient {
public:
    explicit OaiClient(net::Transport& transport, ClientOptions options = {});

    /// One request with transient-failure retries. A non-200 answer is a failure.
    Expected<std::string, Failure> fetch(const std::string& base_url, const net::QueryArgs& args);

    Expected<ProviderInfo, Failure> identify(const std::string& base_url);

    /// Follows the whole token chain. `on_page` sees each parsed page as it arrives.
    HarvestResult list_records(const HarvestTarget& target, std::optional<Instant> from, std::optional<Instant> until,
                               const std::function<void(const oai::ListRecordsPage&)>& on_page = {});
    IdentifiersResult list_identifiers(const HarvestTarget& target, std::optional<Instant> from,
                                       std::optional<Instant> until);
    Expected<oai::MetadataRecord, Failure> get_record(const std::string& base_url, const std::string& identifier,
                                                      const std::string& format_prefix);

    /// Full harvests carry no lower bound; incremental ones start at `since`.
    HarvestResult harvest(const HarvestTarget& target, const HarvestMode& mode);

    const ClientOptions& options() const noexcept { return options_; }

private:
    net::QueryArgs window_args(const HarvestTarget& target, std::string_view verb, std::optional<Instant> from,
                               std::optional<Instant> until) const;

    net::Transport& transport_;
    ClientOptions options_;
    ThreadSleeper default_sleeper_;
};

/// Formats an instant as a request argument at the provider's granularity.
std::string format_request_date(Instant t, oai::Granularity g);

Failure response_failure(const oai::ResponseError& e, const std::string& url);

}  // namespace harvestkit::client
