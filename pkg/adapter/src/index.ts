export * from "./protocol.js";
export * from "./vocab.js";
export * from "./fakeModel.js";
export * from "./session.js";
