#pragma once

#include <map>
#include <set>
#include <vector>

#include "din/common.hpp"
#include "din/digest.hpp"

namespace din {

// Content id: digest of the blob bytes, independent of who publishes.
using ContentId = Digest256;

// Symmetric boolean connectivity between agents. Defaults to fully
// connected; pairs can be severed to model firewalls and partitions.
class Reachability {
 public:
  Reachability() = default;
  explicit Reachability(std::size_t n_agents);

  void block(AgentId a, AgentId b);
  void unblock(AgentId a, AgentId b);
  bool connected(AgentId a, AgentId b) const;
  std::size_t size() const { return n_; }

 private:
  std::size_t n_ = 0;
  std::set<std::pair<AgentId, AgentId>> blocked_;
};

// Desk-scale stand-in for a content-addressed network (one map, no
// networking). Agents publish immutable blobs addressed by digest and
// fetch each other's blobs subject to reachability. Honest online agents
// reshare anything they can get, instantaneously within a round, so a
// blob one honest agent can reach is reachable by every agent connected
// to an honest relay chain.
class ContentStore {
 public:
  explicit ContentStore(std::size_t n_agents);

  void set_reachability(Reachability r) { reach_ = std::move(r); }
  Reachability& reachability() { return reach_; }

  // Relay policy inputs. Dishonest agents never reshare; offline agents
  // neither relay nor hold for the duration.
  void set_dishonest(std::set<AgentId> agents) { dishonest_ = std::move(agents); }
  void set_offline(std::set<AgentId> agents) { offline_ = std::move(agents); }

  // Publish bytes, returns their content id. Identical bytes map to the
  // identical id no matter the publisher. Re-publishing known bytes just
  // adds the publisher as a holder.
  ContentId put(std::vector<std::uint8_t> bytes, AgentId publisher);

  // True if requester could fetch the blob right now (direct link to a
  // holder, or a relay chain of honest online holders-to-be).
  bool can_get(const ContentId& id, AgentId requester) const;

  // Fetch. Throws NotFound when the id is unknown or unreachable. On
  // success the requester becomes a holder (it can reshare later rounds).
  const std::vector<std::uint8_t>& get(const ContentId& id, AgentId requester);

  // Fetch ignoring topology. For simulator-internal consumers that model
  // infrastructure (the aggregation service, the secure environment),
  // not for agent code paths.
  const std::vector<std::uint8_t>& fetch_any(const ContentId& id) const;

  bool contains(const ContentId& id) const { return blobs_.count(id) != 0; }

  // How many of the given ids the agent could fetch.
  std::size_t availability_count(AgentId agent, const std::vector<ContentId>& ids) const;

  std::size_t blob_count() const { return blobs_.size(); }

  // every stored blob, for audits that scan for leaked bytes
  std::vector<const std::vector<std::uint8_t>*> all_blobs() const;

 private:
  struct Blob {
    std::vector<std::uint8_t> bytes;
    std::set<AgentId> holders;
  };

  bool online(AgentId a) const { return offline_.count(a) == 0; }
  bool honest_relay(AgentId a) const {
    return dishonest_.count(a) == 0 && online(a);
  }

  std::size_t n_agents_;
  Reachability reach_;
  std::set<AgentId> dishonest_;
  std::set<AgentId> offline_;
  std::map<ContentId, Blob> blobs_;
};

}  // namespace din
