#include "bnnswarm/protocol.hpp"

#include <algorithm>
#include <exception>
#include <string>

#include "bnnswarm/errors.hpp"

namespace bnnswarm::protocol {

Message Message::make_state(NodeId sender, std::uint32_t round, ParamVector state) {
  return Message{sender, MessageKind::state, round, std::move(state)};
}

Message Message::make_round_complete(NodeId sender, std::uint32_t round) {
  return Message{sender, MessageKind::round_complete, round, std::nullopt};
}

std::vector<std::uint8_t> encode_message(const Message& msg) {
  if (msg.kind == MessageKind::round_complete && msg.state)
    throw ProtocolError("ROUND_COMPLETE must not carry a state");
  if (msg.kind == MessageKind::state && !msg.state) throw ProtocolError("STATE message without a payload");
  std::vector<std::uint8_t> out;
  le::put_u32(out, 0);  // patched below
  le::put_u32(out, msg.sender);
  out.push_back(static_cast<std::uint8_t>(msg.kind));
  le::put_u32(out, msg.round);
  if (msg.state) serialize_into(*msg.state, out);
  const auto total = static_cast<std::uint32_t>(out.size());
  for (int i = 0; i < 4; ++i) out[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(total >> (8 * i));
  return out;
}

std::uint32_t peek_frame_length(std::span<const std::uint8_t> bytes) { return le::get_u32(bytes, 0); }

Message decode_message(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderBytes) throw DecodeError("frame shorter than the 13-byte header");
  const std::uint32_t total = le::get_u32(bytes, 0);
  if (total != bytes.size())
    throw DecodeError("length prefix " + std::to_string(total) + " does not match frame size " +
                      std::to_string(bytes.size()));
  Message msg;
  msg.sender = le::get_u32(bytes, 4);
  const std::uint8_t kind = bytes[8];
  msg.round = le::get_u32(bytes, 9);
  switch (kind) {
    case 0: {
      msg.kind = MessageKind::state;
      std::size_t offset = kHeaderBytes;
      msg.state = deserialize(bytes, offset);
      if (offset != bytes.size()) throw DecodeError("trailing bytes after STATE payload");
      break;
    }
    case 1:
      msg.kind = MessageKind::round_complete;
      if (bytes.size() != kHeaderBytes) throw DecodeError("ROUND_COMPLETE frame carries a payload");
      break;
    default:
      throw DecodeError("unknown message kind " + std::to_string(kind));
  }
  return msg;
}

NodeRuntime NodeRuntime::create(NodeId id, const std::vector<NodeId>& neighbors, std::uint32_t max_round,
                                ParamVector initial_state) {
  if (neighbors.empty()) throw ProtocolError("node " + std::to_string(id) + " has no neighbours");
  NodeRuntime rt;
  rt.id = id;
  rt.max_round = max_round;
  rt.state = std::move(initial_state);
  for (NodeId n : neighbors) {
    if (n == id) throw ProtocolError("node " + std::to_string(id) + " lists itself as a neighbour");
    rt.peer_state[n] = std::nullopt;
    rt.peer_complete[n] = false;
  }
  return rt;
}

bool NodeRuntime::all_slots_filled() const {
  return std::all_of(peer_state.begin(), peer_state.end(), [](const auto& kv) { return kv.second.has_value(); });
}

bool NodeRuntime::all_complete() const {
  return self_complete &&
         std::all_of(peer_complete.begin(), peer_complete.end(), [](const auto& kv) { return kv.second; });
}

namespace {

// The control part of NodeRuntime, enough to plan actions without copying states.
struct Flags {
  std::uint32_t round;
  std::uint32_t max_round;
  std::map<NodeId, bool> filled;
  std::map<NodeId, bool> complete;
  bool self_complete;

  explicit Flags(const NodeRuntime& rt)
      : round(rt.round), max_round(rt.max_round), complete(rt.peer_complete), self_complete(rt.self_complete) {
    for (const auto& [id, s] : rt.peer_state) filled[id] = s.has_value();
  }

  bool all_filled() const {
    return std::all_of(filled.begin(), filled.end(), [](const auto& kv) { return kv.second; });
  }
  bool all_complete() const {
    return self_complete && std::all_of(complete.begin(), complete.end(), [](const auto& kv) { return kv.second; });
  }
  void finish_round() {
    for (auto& kv : complete) kv.second = false;
    self_complete = false;
    ++round;
  }
};

}  // namespace

std::vector<Action> handle_message(const NodeRuntime& runtime, const Message& msg) {
  if (!runtime.peer_state.contains(msg.sender))
    throw ProtocolError("node " + std::to_string(runtime.id) + " got a message from unknown sender " +
                        std::to_string(msg.sender));
  if (msg.kind == MessageKind::state && !msg.state)
    throw ProtocolError("malformed STATE message from " + std::to_string(msg.sender) + ": no payload");
  std::vector<Action> actions;
  if (runtime.finished()) return actions;

  Flags f(runtime);
  if (msg.kind == MessageKind::round_complete) {
    // A completion left over from a round this node already closed says
    // nothing about the current round.
    if (msg.round < f.round) return actions;
    f.complete[msg.sender] = true;
    actions.push_back({ActionKind::mark_complete, msg.sender, std::nullopt});
  } else {
    if (f.round < msg.round) {
      f.finish_round();
      actions.push_back({ActionKind::finish_round, 0, std::nullopt});
      if (f.round >= f.max_round) return actions;
    }
    f.filled[msg.sender] = true;
    actions.push_back({ActionKind::store_state, msg.sender, std::nullopt});
  }

  if (f.all_filled()) {
    for (auto& kv : f.filled) kv.second = false;
    f.self_complete = true;
    actions.push_back({ActionKind::do_update, 0, std::nullopt});
    actions.push_back({ActionKind::send, 0, Message::make_round_complete(runtime.id, f.round)});
  }
  if (f.all_complete()) {
    f.finish_round();
    actions.push_back({ActionKind::finish_round, 0, std::nullopt});
  }
  return actions;
}

PeerNode::PeerNode(NodeRuntime runtime, UpdateFn on_update)
    : runtime_(std::move(runtime)), on_update_(std::move(on_update)) {}

Message PeerNode::start() const { return Message::make_state(runtime_.id, runtime_.round, runtime_.state); }

std::vector<Message> PeerNode::deliver(const Message& msg) {
  std::vector<Message> outgoing;
  const auto actions = handle_message(runtime_, msg);
  for (const auto& a : actions) {
    switch (a.kind) {
      case ActionKind::store_state:
        runtime_.peer_state[a.peer] = msg.state;
        break;
      case ActionKind::mark_complete:
        runtime_.peer_complete[a.peer] = true;
        break;
      case ActionKind::do_update: {
        std::vector<PeerSnapshot> peers;
        peers.reserve(runtime_.peer_state.size());
        for (const auto& [id, s] : runtime_.peer_state) peers.push_back({id, &*s});
        try {
          runtime_.state = on_update_(runtime_.state, peers, runtime_.round);
        } catch (const std::exception& e) {
          throw UpdateError(runtime_.id, runtime_.round, e.what());
        }
        ++updates_;
        for (auto& kv : runtime_.peer_state) kv.second.reset();
        runtime_.self_complete = true;
        break;
      }
      case ActionKind::finish_round:
        for (auto& kv : runtime_.peer_complete) kv.second = false;
        runtime_.self_complete = false;
        ++runtime_.round;
        outgoing.push_back(Message::make_state(runtime_.id, runtime_.round, runtime_.state));
        break;
      case ActionKind::send:
        outgoing.push_back(*a.message);
        break;
    }
  }
  return outgoing;
}

ParamVector run_node(NodeRuntime runtime, Transport& transport, const UpdateFn& on_update, std::uint32_t* updates) {
  PeerNode node(std::move(runtime), on_update);
  transport.send(node.start());
  while (!node.finished()) {
    const Message msg = transport.receive();
    for (const auto& out : node.deliver(msg)) transport.send(out);
  }
  if (updates) *updates = node.update_count();
  return node.runtime().state;
}

}  // namespace bnnswarm::protocol
