#include "eti_arena/agents.hpp"

#include <cmath>
#include <iomanip>
#include <regex>
#include <sstream>
#include <thread>

#include "eti_arena/errors.hpp"
#include "eti_arena/oracle.hpp"

namespace eti {

namespace {

constexpr std::string_view kProbeCooperativeLine = "COOPERATIVE: yes or no";
constexpr std::string_view kProbeCompetentLine = "COMPETENT: yes or no";

long count_words(std::string_view s) {
  long n = 0;
  bool in_word = false;
  for (char c : s) {
    const bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

int next_round(std::span<const RoundRecord> history) {
  return history.empty() ? 1 : history.back().round + 1;
}

void check_mode(AgentMode mode, const AgentView& view) {
  if (mode == AgentMode::ETI && view.store == nullptr) {
    throw DomainError("ETI mode requires a profile store");
  }
  if (mode == AgentMode::BaselineCoT && view.store != nullptr) {
    throw DomainError("baseline mode must not receive trait profiles");
  }
}

std::string system_prompt(const AgentView& view) {
  std::ostringstream s;
  s << "You are " << kDefaultAgentId << ", a player in an iterated "
    << to_string(view.table.game()) << " against " << view.opponent_id
    << ". Your goal is to maximize your own cumulative payoff over all rounds.";
  return s.str();
}

std::string context_block(const AgentView& view) {
  std::ostringstream u;
  u << "Task:\n" << describe_game(view.table, view.opponent_id) << "\n";
  u << "Context:\nInteraction history with " << view.opponent_id << ":\n"
    << render_history(view.history, view.opponent_id);
  if (view.history.empty()) u << "\n";
  return u.str();
}

std::string with_profiles(AgentMode mode, const AgentView& view,
                          std::string base) {
  if (mode != AgentMode::ETI) return base;
  const auto profiles = view.store->current_profiles();
  return inject_profiles(base, profiles);
}

}  // namespace

void DecodingParams::validate() const {
  if (!(temperature >= 0.0) || !(top_p > 0.0 && top_p <= 1.0) || top_k < 0 ||
      !(min_p >= 0.0 && min_p <= 1.0)) {
    throw DomainError("decoding parameters out of range");
  }
}

std::string_view to_string(AgentMode m) noexcept {
  return m == AgentMode::ETI ? "eti" : "baseline";
}

AgentMode parse_mode(std::string_view s) {
  if (s == "eti" || s == "ETI") return AgentMode::ETI;
  if (s == "baseline" || s == "cot" || s == "baseline_cot") {
    return AgentMode::BaselineCoT;
  }
  throw DomainError("unknown agent mode '" + std::string(s) + "'");
}

Completion CallLog::call(GenerationBackend& backend, std::string kind,
                         const ChatPrompt& prompt, const DecodingParams& params) {
  Completion c = backend.complete(prompt, params);
  ++calls;
  prompt_tokens += c.prompt_tokens;
  completion_tokens += c.completion_tokens;
  if (capture_transcript && !transcript_truncated) {
    const std::size_t bytes =
        prompt.system.size() + prompt.user.size() + c.text.size();
    if (transcript_bytes + bytes > max_transcript_bytes) {
      transcript_truncated = true;
    } else {
      transcript_bytes += bytes;
      pending.push_back(Exchange{std::move(kind), prompt, c.text});
    }
  }
  return c;
}

// ---- prompts ----------------------------------------------------------------

ChatPrompt build_decision_prompt(AgentMode mode, const AgentView& view) {
  check_mode(mode, view);
  const auto acts = actions_of(view.table.game());
  std::ostringstream u;
  u << context_block(view) << "\n";
  u << "Action Instruction:\n"
    << "Reason step by step about " << view.opponent_id
    << "'s past choices and outcomes, then choose your action for round "
    << next_round(view.history) << ". End your reply with a final line of the "
    << "form \"ANSWER: " << to_string(acts[0]) << "\" or \"ANSWER: "
    << to_string(acts[1]) << "\".";
  return {system_prompt(view), with_profiles(mode, view, u.str())};
}

ChatPrompt build_probe_prompt(AgentMode mode, const AgentView& view) {
  check_mode(mode, view);
  std::ostringstream u;
  u << context_block(view) << "\n";
  u << "Probe Instruction:\n"
    << "Do not choose an action. Based on the interaction so far, answer two "
       "questions about "
    << view.opponent_id << ".\n"
    << "1. Is " << view.opponent_id
    << " cooperative, i.e. does it mostly choose the cooperative action?\n"
    << "2. Is " << view.opponent_id
    << " competent, i.e. do its actions mostly execute successfully?\n"
    << "Reply with exactly these two lines:\n"
    << kProbeCooperativeLine << "\n"
    << kProbeCompetentLine;
  return {system_prompt(view), with_profiles(mode, view, u.str())};
}

ChatPrompt build_agent_inference_prompt(const AgentView& view) {
  const auto& defs = trait_definitions();
  return build_inference_prompt(describe_game(view.table, view.opponent_id),
                                render_history(view.history, view.opponent_id),
                                defs, view.opponent_id);
}

// ---- extraction -------------------------------------------------------------

std::optional<Action> extract_action(GameKind game, std::string_view text) {
  static const std::regex re(R"(ANSWER\s*:\s*[\*"'`\[]*\s*([A-Za-z]+))",
                             std::regex::icase);
  std::optional<Action> found;
  const std::string s(text);
  for (auto it = std::sregex_iterator(s.begin(), s.end(), re);
       it != std::sregex_iterator(); ++it) {
    if (auto a = parse_action(game, (*it)[1].str())) found = a;
  }
  return found;
}

std::optional<std::pair<bool, bool>> extract_probe(std::string_view text) {
  static const std::regex coop(R"(COOPERATIVE\s*:\s*\**\s*(yes|no)\b)",
                               std::regex::icase);
  static const std::regex comp(R"(COMPETENT\s*:\s*\**\s*(yes|no)\b)",
                               std::regex::icase);
  const std::string s(text);
  const auto last = [&](const std::regex& re) -> std::optional<bool> {
    std::optional<bool> v;
    for (auto it = std::sregex_iterator(s.begin(), s.end(), re);
         it != std::sregex_iterator(); ++it) {
      const auto word = (*it)[1].str();
      v = (word[0] == 'y' || word[0] == 'Y');
    }
    return v;
  };
  const auto a = last(coop);
  const auto b = last(comp);
  if (!a || !b) return std::nullopt;
  return std::make_pair(*a, *b);
}

// ---- agent operations -------------------------------------------------------

DecisionResult decide_action(AgentMode mode, const AgentView& view,
                             GenerationBackend& backend,
                             const DecodingParams& params, CallLog& log) {
  const ChatPrompt prompt = build_decision_prompt(mode, view);
  const GameKind game = view.table.game();
  const auto acts = actions_of(game);
  ChatPrompt attempt = prompt;
  for (int i = 0; i <= kDecisionRetries; ++i) {
    const auto c = log.call(backend, i == 0 ? "decision" : "decision-retry",
                            attempt, params);
    if (auto a = extract_action(game, c.text)) return {*a, c.text};
    attempt = prompt;
    attempt.user += "\n\nYour previous reply did not contain a valid answer "
                    "line. Reply again and end with \"ANSWER: " +
                    std::string(to_string(acts[0])) + "\" or \"ANSWER: " +
                    std::string(to_string(acts[1])) + "\".";
  }
  throw AgentOutputError("no valid action after " +
                         std::to_string(kDecisionRetries) + " retries");
}

std::optional<ProbeResult> probe_traits(AgentMode mode, const AgentView& view,
                                        GenerationBackend& backend,
                                        const DecodingParams& params,
                                        CallLog& log) {
  const ChatPrompt prompt = build_probe_prompt(mode, view);
  ChatPrompt attempt = prompt;
  for (int i = 0; i <= kProbeRetries; ++i) {
    const auto c =
        log.call(backend, i == 0 ? "probe" : "probe-retry", attempt, params);
    if (auto p = extract_probe(c.text)) {
      return ProbeResult{p->first, p->second, c.text};
    }
    attempt = prompt;
    attempt.user +=
        "\n\nYour previous reply did not answer both questions. Reply with "
        "exactly two lines, \"COOPERATIVE: yes\" or \"COOPERATIVE: no\", then "
        "\"COMPETENT: yes\" or \"COMPETENT: no\".";
  }
  return std::nullopt;
}

InferenceResult infer_profile(const AgentView& view, int round,
                              const TraitProfile* previous,
                              GenerationBackend& backend,
                              const DecodingParams& params, CallLog& log) {
  const ChatPrompt prompt = build_agent_inference_prompt(view);
  ChatPrompt attempt = prompt;
  for (int i = 0; i <= kInferenceRetries; ++i) {
    const auto c = log.call(backend, i == 0 ? "inference" : "inference-retry",
                            attempt, params);
    try {
      return {parse_profile(c.text, view.opponent_id, round), false};
    } catch (const ProfileError& e) {
      attempt = prompt;
      attempt.user += "\n\nYour previous reply could not be used: ";
      attempt.user += e.what();
      attempt.user +=
          ". Reply again with only the JSON object in the required format.";
    }
  }
  if (previous != nullptr) {
    TraitProfile carried = *previous;
    carried.produced_at_round = round;
    return {std::move(carried), true};
  }
  return {not_applicable_profile(view.opponent_id, round), true};
}

// ---- frequency agent --------------------------------------------------------

FrequencyEstimate estimate_from_counts(int observations, int cooperative,
                                       int successful, double prior_cooperation,
                                       double prior_competence) {
  FrequencyEstimate e;
  e.observations = observations;
  e.cooperative = cooperative;
  e.successful = successful;
  e.cooperation = (cooperative + 2.0 * prior_cooperation) / (observations + 2.0);
  e.competence = (successful + 2.0 * prior_competence) / (observations + 2.0);
  return e;
}

FrequencyEstimate estimate_from_history(std::span<const RoundRecord> history) {
  int coop = 0;
  int ok = 0;
  for (const auto& r : history) {
    coop += is_cooperative(r.opponent_intended) ? 1 : 0;
    ok += r.opponent_success ? 1 : 0;
  }
  return estimate_from_counts(static_cast<int>(history.size()), coop, ok);
}

std::pair<double, double> profile_prior(const TraitProfile& profile) {
  double warm_sum = 0.0;
  int warm_n = 0;
  double comp_sum = 0.0;
  int comp_n = 0;
  for (const auto& def : trait_definitions()) {
    const auto& r = profile.rating(def.trait);
    if (!r.value) continue;
    double level = (*r.value - 1) / 6.0;
    if (def.trait == Trait::Maliciousness) level = 1.0 - level;
    if (def.dimension == TraitDimension::Warmth) {
      warm_sum += level;
      ++warm_n;
    } else {
      comp_sum += level;
      ++comp_n;
    }
  }
  return {warm_n ? warm_sum / warm_n : 0.5, comp_n ? comp_sum / comp_n : 0.5};
}

Action mock_decision(const PayoffTable& table, const FrequencyEstimate& est) {
  return best_response(table, OpponentPolicy{est.cooperation, est.competence});
}

std::pair<bool, bool> mock_probe(const FrequencyEstimate& est) {
  return {est.cooperation >= 0.5, est.competence >= 0.5};
}

namespace {
int likert(double p) {
  return static_cast<int>(std::lround(1.0 + 6.0 * p));
}

std::string fmt2(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << v;
  return s.str();
}
}  // namespace

TraitProfile mock_profile(const FrequencyEstimate& est, std::string subject,
                          int round) {
  TraitProfile p;
  p.subject = std::move(subject);
  p.produced_at_round = round;
  const int n = est.observations;
  std::string warmth_evidence;
  std::string competence_evidence;
  if (n == 0) {
    warmth_evidence = competence_evidence =
        "No rounds observed yet; the rating reflects an uninformed prior.";
  } else {
    warmth_evidence = p.subject + " chose the cooperative action in " +
                      std::to_string(est.cooperative) + " of " +
                      std::to_string(n) + " observed rounds (estimated rate " +
                      fmt2(est.cooperation) + ").";
    competence_evidence = p.subject + "'s actions succeeded in " +
                          std::to_string(est.successful) + " of " +
                          std::to_string(n) +
                          " observed rounds (estimated rate " +
                          fmt2(est.competence) + ").";
  }
  for (const auto& def : trait_definitions()) {
    auto& r = p.rating(def.trait);
    if (def.dimension == TraitDimension::Competence) {
      r = {likert(est.competence), competence_evidence};
    } else if (def.trait == Trait::Maliciousness) {
      r = {likert(1.0 - est.cooperation), warmth_evidence};
    } else {
      r = {likert(est.cooperation), warmth_evidence};
    }
  }
  return p;
}

MockFrequencyBackend::MockFrequencyBackend(std::size_t concurrency)
    : concurrency_(concurrency != 0
                       ? concurrency
                       : std::max(1u, std::thread::hardware_concurrency())) {}

namespace {

struct ParsedPrompt {
  std::optional<GameKind> game;
  int observations = 0;
  int cooperative = 0;
  int successful = 0;
  std::optional<TraitProfile> injected;
  std::string subject = std::string(kDefaultOpponentId);
};

ParsedPrompt read_prompt(const std::string& user) {
  constexpr std::string_view kGame = "Game: ";
  constexpr std::string_view kChose = ": You chose ";
  constexpr std::string_view kIntended = " intended ";
  constexpr std::string_view kSubject = "traits apply to ";
  ParsedPrompt out;
  std::string_view history_part = user;
  std::string_view injected_part;
  if (const auto pos = user.find(kInjectionPreamble); pos != std::string::npos) {
    history_part = history_part.substr(0, pos);
    injected_part = std::string_view(user).substr(pos + kInjectionPreamble.size());
  }
  while (!history_part.empty()) {
    const auto nl = history_part.find('\n');
    const std::string_view line = history_part.substr(0, nl);
    history_part = nl == std::string_view::npos ? std::string_view{}
                                                : history_part.substr(nl + 1);
    if (!out.game && line.starts_with(kGame)) {
      try {
        out.game = parse_game(line.substr(kGame.size()));
      } catch (const DomainError&) {
      }
    } else if (out.game && line.starts_with("Round ") &&
               line.find(kChose) != std::string_view::npos) {
      // Round <t>: You chose <a>. <id> intended <b> and the action succeeded.
      const auto at = line.rfind(kIntended);
      if (at == std::string_view::npos) continue;
      const auto rest = line.substr(at + kIntended.size());
      const auto word = rest.substr(0, rest.find(' '));
      const auto intended = parse_action(*out.game, word);
      if (!intended) continue;
      ++out.observations;
      out.cooperative += is_cooperative(*intended) ? 1 : 0;
      out.successful +=
          rest.find(" and the action succeeded.") != std::string_view::npos;
    } else if (const auto s = line.find(kSubject); s != std::string_view::npos &&
                                                   line.ends_with(".")) {
      const auto name = line.substr(s + kSubject.size());
      out.subject = std::string(name.substr(0, name.size() - 1));
    }
  }
  if (!injected_part.empty()) {
    try {
      out.injected = parse_profile(injected_part, out.subject, 0);
    } catch (const ProfileError&) {
    }
  }
  return out;
}

}  // namespace

Completion MockFrequencyBackend::complete(const ChatPrompt& prompt,
                                          const DecodingParams&) {
  const ParsedPrompt parsed = read_prompt(prompt.user);
  Completion c;
  c.prompt_tokens = count_words(prompt.system) + count_words(prompt.user);
  if (!parsed.game) {
    c.text = "I cannot tell which game this is.";
  } else {
    double prior_c = 0.5;
    double prior_i = 0.5;
    if (parsed.injected) std::tie(prior_c, prior_i) = profile_prior(*parsed.injected);
    const auto est = estimate_from_counts(parsed.observations, parsed.cooperative,
                                          parsed.successful, prior_c, prior_i);
    if (prompt.system == kInferenceSystemPrompt) {
      c.text = render_profile_json(mock_profile(est, parsed.subject, 0));
    } else if (prompt.user.find(kProbeCooperativeLine) != std::string::npos) {
      const auto [coop, comp] = mock_probe(est);
      c.text = std::string("COOPERATIVE: ") + (coop ? "yes" : "no") +
               "\nCOMPETENT: " + (comp ? "yes" : "no");
    } else if (prompt.user.find("ANSWER:") != std::string::npos) {
      const PayoffTable table = PayoffTable::standard(*parsed.game);
      const auto acts = actions_of(*parsed.game);
      std::ostringstream s;
      s << "Estimated cooperation rate " << fmt2(est.cooperation)
        << ", competence rate " << fmt2(est.competence) << ". Expected payoff: "
        << to_string(acts[0]) << " "
        << fmt2(expected_payoff(table, acts[0], {est.cooperation, est.competence}))
        << ", " << to_string(acts[1]) << " "
        << fmt2(expected_payoff(table, acts[1], {est.cooperation, est.competence}))
        << ".\nANSWER: " << to_string(mock_decision(table, est));
      c.text = s.str();
    } else {
      c.text = "No instruction recognised.";
    }
  }
  c.completion_tokens = count_words(c.text);
  return c;
}

}  // namespace eti
