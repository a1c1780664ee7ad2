// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <kumo/registry.hpp>
#include <kumo/simulator.hpp>
#include <kumo/taskgen.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

namespace kumo
{

struct Earnings
{
    double base = 25.0;
    double success_component = 0.0;
    double action_penalty = 0.0;
    double total = 0.0;
};

inline constexpr double EarningsBase = 25.0;
inline constexpr double EarningsPerSuccessRate = 15.0;
inline constexpr double EarningsPerAction = 0.1;

/// 25 + 15 * success_rate - 0.1 * actions. Predictions are not actions.
Earnings compute_earnings(double success_rate, int action_count);

/// Recomputes earnings from a finished set of trajectories. Throws EmptyInput.
Earnings earnings_from_trajectories(std::span<const Trajectory> trajectories);

struct Participant
{
    std::string id;
    std::string token;
};

/// Reads "id<TAB>token" lines; blank lines and '#' comments are skipped.
std::vector<Participant> load_participants(const std::filesystem::path& path);

struct QualityThresholds
{
    double median_latency_ms = 2000.0;
    /// Flag only when the success rate is at most chance times this factor.
    double chance_factor = 1.0;
};

struct ServiceOptions
{
    std::filesystem::path data_dir; // empty: KUMO_DATA_DIR, else ./kumo-data
    std::uint64_t seed = 0;
    int domains_per_set = 5;
    int task_set_pool = 10; // pregenerated task sets participants are drawn from
    QualityThresholds quality;
    std::function<std::int64_t()> clock; // unix milliseconds; default system clock
};

enum class TaskStatus
{
    Pending,
    Active,
    Succeeded,
    Failed,
};

std::string_view to_string(TaskStatus status);

/// What a participant may see of one task.
struct TaskView
{
    std::size_t index = 0;
    std::string task_id;
    std::string domain;
    std::string difficulty;
    TaskStatus status = TaskStatus::Pending;
    int action_count = 0;
    GameView game;
};

struct TaskSetAssignment
{
    std::string session_id;
    std::string participant;
    std::string task_set;
    std::vector<TaskView> tasks;
    std::optional<std::size_t> current; // none once every task is finished
};

struct ActionResult
{
    std::size_t task_index = 0;
    std::string action;
    std::string observation;
    bool repeated = false;
    int action_count = 0; // for this task
};

struct RunningScore
{
    int completed = 0;
    int correct = 0;
    int actions = 0;
    std::optional<Earnings> earnings; // set once the whole set is finished
};

struct PredictionResult
{
    std::size_t task_index = 0;
    std::string truth;
    bool correct = false;
    RunningScore score;
};

struct SessionSummary
{
    std::string session_id;
    std::string participant;
    std::string task_set;
    bool finished = false;
    double success_rate = 0.0;
    int actions = 0;
    double median_latency_ms = 0.0;
    double chance_rate = 0.0;
    bool low_quality = false;
    std::optional<Earnings> earnings;
};

/// Median gap between consecutive turns, the first measured from the task start.
double median_turn_latency_ms(std::span<const Trajectory> trajectories, std::span<const std::int64_t> task_starts);

/// Picks one non-flagged finished session per task set, uniformly with the seed.
/// Returned ids are ordered by task set.
std::vector<std::string> select_one_per_task_set(std::span<const SessionSummary> sessions, std::uint64_t seed);

/// Human-play protocol: authenticated participants get a 10-task assignment
/// (one Easy and one Hard task from each of 5 domains) and play it through
/// actions and predictions. Every mutation is appended to a per-session event
/// log before it is acknowledged; sessions are restored from those logs.
///
/// Mutations carry an optional request id; a repeated id returns the stored
/// response without replaying the move.
class PlayService
{
public:
    PlayService(const Registry& registry, std::vector<Participant> participants, ServiceOptions options = {});
    ~PlayService();
    PlayService(const PlayService&) = delete;
    PlayService& operator=(const PlayService&) = delete;

    /// Throws AuthFailure for an unknown token.
    [[nodiscard]] std::string authenticate(const std::string& token) const;

    /// Throws InsufficientTaskPool when fewer than 5 environments can supply both difficulties.
    TaskSetAssignment create_session(const std::string& participant, const std::string& request_id = {});
    /// Throws UnknownSession (also for another participant's session).
    [[nodiscard]] TaskSetAssignment get_session(const std::string& participant, const std::string& session_id) const;
    [[nodiscard]] std::string knowledge_book(const std::string& participant, const std::string& session_id,
                                             std::optional<std::size_t> task = std::nullopt) const;

    /// Plays on the current task, or on `task` when given. Throws UnknownAction
    /// for a name outside that task and SessionTerminated for a finished task or set.
    ActionResult post_action(const std::string& participant, const std::string& session_id, const std::string& action,
                             const std::string& request_id = {}, std::optional<std::size_t> task = std::nullopt);
    /// Throws UnknownTruth for a non-candidate and SessionTerminated as above.
    PredictionResult post_prediction(const std::string& participant, const std::string& session_id, const std::string& truth,
                                     const std::string& request_id = {}, std::optional<std::size_t> task = std::nullopt);

    /// Computed from the persisted trajectories of the session.
    [[nodiscard]] SessionSummary score(const std::string& participant, const std::string& session_id) const;
    [[nodiscard]] std::vector<SessionSummary> summaries() const;

    [[nodiscard]] const std::filesystem::path& data_dir() const noexcept { return _options.data_dir; }
    [[nodiscard]] std::filesystem::path trajectories_path() const;

private:
    struct PlaySession;
    struct TaskSet;

    std::shared_ptr<PlaySession> find(const std::string& participant, const std::string& session_id) const;
    const std::vector<TaskSet>& task_sets();
    void restore();
    std::int64_t now() const;

    Registry _registry;
    std::map<std::string, std::string> _token_to_participant;
    ServiceOptions _options;

    mutable std::shared_mutex _sessions_mutex;
    std::map<std::string, std::shared_ptr<PlaySession>> _sessions;
    std::map<std::string, std::string> _create_requests; // participant + request id -> session id
    std::uint64_t _created = 0;

    std::mutex _pool_mutex;
    std::optional<std::vector<TaskSet>> _pool;
    mutable std::mutex _log_mutex; // shared trajectory log
};

/// JSON-over-HTTP front of a PlayService. Clients send "Authorization: Bearer <token>".
class PlayServer
{
public:
    explicit PlayServer(PlayService& service);
    ~PlayServer();
    PlayServer(const PlayServer&) = delete;
    PlayServer& operator=(const PlayServer&) = delete;

    /// Binds host:port (0 picks a free port) and serves in a background thread.
    void start(const std::string& host = "127.0.0.1", int port = 0);
    /// Blocks serving on the calling thread.
    void listen(const std::string& host, int port);
    void stop();
    [[nodiscard]] int port() const noexcept { return _port; }

private:
    struct Impl;
    std::unique_ptr<Impl> _impl;
    int _port = 0;
};

} // namespace kumo
