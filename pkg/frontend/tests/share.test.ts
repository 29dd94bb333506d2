import { beforeEach, describe, expect, it } from "vitest";

import { boot } from "../src/main";
import { decodeShareLink, encodeShareLink, initForm, setField } from "../src/state";
import { installMockFetch, schemaFeatures } from "./mock_service";

describe("share links", () => {
  beforeEach(() => {
    document.body.innerHTML = '<div id="app"></div>';
    window.location.hash = "";
  });

  it("encode/decode round-trips raw field text exactly", () => {
    const form = initForm(schemaFeatures(), "cohesion");
    setField(form, "plastics", "0.3500");
    setField(form, "density_kn_m3", "7.230");
    const link = encodeShareLink(form);
    const { values, target } = decodeShareLink(link);
    expect(target).toBe("cohesion");
    expect(values.get("plastics")).toBe("0.3500");
    expect(values.get("density_kn_m3")).toBe("7.230");
  });

  it("loading a share link reproduces the exact form", async () => {
    installMockFetch();
    const root = document.getElementById("app")!;
    await boot(root);

    const plastics = root.querySelector<HTMLInputElement>('input[name="plastics"]')!;
    plastics.value = "0.6180";
    plastics.dispatchEvent(new Event("input"));
    const moisture = root.querySelector<HTMLInputElement>('input[name="moisture_content"]')!;
    moisture.value = "0.40";
    moisture.dispatchEvent(new Event("input"));

    root.querySelector<HTMLButtonElement>("#share-btn")!.click();
    const url = root.querySelector<HTMLInputElement>("#share-url")!.value;
    expect(url).toContain("plastics");
    const hash = new URL(url).hash;

    // fresh app instance loading the link
    document.body.innerHTML = '<div id="app"></div>';
    window.location.hash = hash;
    const fresh = document.getElementById("app")!;
    await boot(fresh);
    expect(fresh.querySelector<HTMLInputElement>('input[name="plastics"]')!.value).toBe("0.6180");
    expect(fresh.querySelector<HTMLInputElement>('input[name="moisture_content"]')!.value).toBe("0.40");
    expect(
      fresh.querySelector<HTMLInputElement>('input[name="density_kn_m3"]')!.value,
    ).toBe("7.23");
  });

  it("share link preserves the selected target", async () => {
    installMockFetch();
    const root = document.getElementById("app")!;
    await boot(root);
    const app = (root as HTMLElement & { __app?: { state: { form: { target: string } } } }).__app!;
    app.state.form.target = "cohesion";
    root.querySelector<HTMLButtonElement>("#share-btn")!.click();
    const hash = new URL(root.querySelector<HTMLInputElement>("#share-url")!.value).hash;

    document.body.innerHTML = '<div id="app"></div>';
    window.location.hash = hash;
    const fresh = document.getElementById("app")!;
    await boot(fresh);
    expect(fresh.querySelector<HTMLSelectElement>("#target-select")!.value).toBe("cohesion");
  });
});
