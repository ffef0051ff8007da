#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "bnnswarm/param_vector.hpp"

namespace bnnswarm::protocol {

using NodeId = std::uint32_t;

enum class MessageKind : std::uint8_t { state = 0, round_complete = 1 };

struct Message {
  NodeId sender = 0;
  MessageKind kind = MessageKind::state;
  std::uint32_t round = 0;
  std::optional<ParamVector> state;  // present iff kind == state

  static Message make_state(NodeId sender, std::uint32_t round, ParamVector state);
  static Message make_round_complete(NodeId sender, std::uint32_t round);

  bool operator==(const Message&) const = default;
};

// Wire frame, little-endian:
//   [u32 total_length][u32 sender][u8 kind][u32 round]
//   [u32 mu_count][u32 rho_count][(mu_count + rho_count) x f64]   (STATE only)
// total_length counts the whole frame, including itself.
inline constexpr std::size_t kHeaderBytes = 13;

std::vector<std::uint8_t> encode_message(const Message& msg);
// Throws DecodeError on any malformed input; never reads out of bounds.
Message decode_message(std::span<const std::uint8_t> bytes);
// Length announced by the frame prefix. Throws DecodeError if fewer than 4 bytes.
std::uint32_t peek_frame_length(std::span<const std::uint8_t> bytes);

// Per-node protocol state. Peer tables hold neighbours only; the node's own
// completion lives in `self_complete`.
struct NodeRuntime {
  NodeId id = 0;
  std::uint32_t round = 0;
  std::uint32_t max_round = 0;
  std::map<NodeId, std::optional<ParamVector>> peer_state;
  std::map<NodeId, bool> peer_complete;
  bool self_complete = false;
  ParamVector state;

  static NodeRuntime create(NodeId id, const std::vector<NodeId>& neighbors, std::uint32_t max_round,
                            ParamVector initial_state);

  bool finished() const { return round >= max_round; }
  bool all_slots_filled() const;
  bool all_complete() const;
};

enum class ActionKind { store_state, mark_complete, do_update, finish_round, send };

struct Action {
  ActionKind kind;
  NodeId peer = 0;                 // store_state / mark_complete
  std::optional<Message> message;  // send

  bool operator==(const Action&) const = default;
};

// Pure transition function: the actions a node takes on `msg`, in the
// order they must be applied. Does not touch `runtime`.
// FINISH_ROUND resets completion flags, advances the round and broadcasts
// (State, round). DO_UPDATE runs NodeUpdate, clears the peer slots and
// marks the node itself complete.
std::vector<Action> handle_message(const NodeRuntime& runtime, const Message& msg);

struct PeerSnapshot {
  NodeId id;
  const ParamVector* state;
};

// NodeUpdate: new own state from the current one and the neighbours' states
// (ascending id). `round` is the round the update belongs to.
using UpdateFn = std::function<ParamVector(const ParamVector& own, std::span<const PeerSnapshot> peers,
                                           std::uint32_t round)>;

// Executes handle_message's actions against a runtime. Transport-agnostic:
// callers feed incoming messages and broadcast whatever comes back.
class PeerNode {
 public:
  PeerNode(NodeRuntime runtime, UpdateFn on_update);

  // The initial (State, 0) broadcast.
  Message start() const;
  // Processes one message and returns the messages to broadcast.
  // Messages arriving after termination are ignored.
  std::vector<Message> deliver(const Message& msg);

  bool finished() const { return runtime_.finished(); }
  const NodeRuntime& runtime() const { return runtime_; }
  NodeId id() const { return runtime_.id; }
  std::uint32_t update_count() const { return updates_; }

 private:
  NodeRuntime runtime_;
  UpdateFn on_update_;
  std::uint32_t updates_ = 0;
};

// Point of attachment of one node to the network. send() broadcasts to all
// neighbours.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual void send(const Message& msg) = 0;
  virtual Message receive() = 0;
};

// Runs one node to completion over a blocking transport; returns its final state.
ParamVector run_node(NodeRuntime runtime, Transport& transport, const UpdateFn& on_update,
                     std::uint32_t* updates = nullptr);

}  // namespace bnnswarm::protocol
