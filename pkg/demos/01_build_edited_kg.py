#!/usr/bin/env python3
"""Build a knowledge graph, apply counterfactual edits, and watch the ripple.

The edit bank replaces two tails: the book's author and a country's capital.
After the merge, walking tail-to-head from the question entity follows a
completely different fact chain than before.
"""

from kgedit import Edit, KGBuilder, Triple, validate_chain

builder = KGBuilder()
for head, relation, tail in [
    ("Harry Potter", "author", "J. K. Rowling"),
    ("Stephen King", "citizen of", "United States"),
    ("United States", "capital", "Washington, D.C."),
    ("J. K. Rowling", "citizen of", "United Kingdom"),
    ("United Kingdom", "capital", "London"),
]:
    builder.add_triple(Triple(head, relation, tail))

print("Applying two edits:")
for edit in [
    Edit("Harry Potter", "author", "Stephen King", old_tail="J. K. Rowling"),
    Edit("United States", "capital", "Boston", old_tail="Washington, D.C."),
]:
    print(f"  ({edit.head}, {edit.relation}): {edit.old_tail} -> {edit.new_tail}")
    builder.apply_edit(edit)

kg = builder.freeze()
print(f"\nMerged store holds {len(kg)} facts, {kg.edited_count} of them edited.\n")

print("Outgoing edges per entity (relation, tail, edited?):")
for entity in kg.entities():
    for relation, tail, edited in kg.outgoing(entity):
        flag = "  [edited]" if edited else ""
        print(f"  {entity} --{relation}--> {tail}{flag}")

# Follow the chain the edits created: each tail is the next head.
chain = validate_chain(
    [
        Triple("Harry Potter", "author", "Stephen King"),
        Triple("Stephen King", "citizen of", "United States"),
        Triple("United States", "capital", "Boston"),
    ]
)
print(f"\nThe edited {chain.hop_count}-hop chain now ends at: {chain.links[-1].tail}")
print("Before the edits the same walk ended at: London")
