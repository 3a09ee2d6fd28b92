//! Reference class templates and the default central script.

use crate::prompt::FrameworkId;
use crate::scene::{CANVAS_HEIGHT, CANVAS_WIDTH};

/// Element class template with the four transform anchors at identity and
/// empty marker regions.
pub fn element_template(framework: FrameworkId, name: &str) -> String {
    match framework {
        FrameworkId::Phaser => format!(
            r#"class {name} {{
  constructor(scene) {{
    this.scene = scene;
    //variable start
    this.x = 0;
    this.y = 0;
    this.rotationDeg = 0;
    this.scale = 1;
    //variable end
  }}

  preload() {{
    if (ASSETS.{name}) {{
      this.scene.load.image('{name}', ASSETS.{name});
    }}
  }}

  create() {{
    if (ASSETS.{name}) {{
      this.sprite = this.scene.add.image(this.x, this.y, '{name}');
      this.sprite.setAngle(this.rotationDeg);
      this.sprite.setScale(this.scale);
    }}
  }}

  update(time, delta) {{
    if (this.sprite) {{
      this.sprite.setPosition(this.x, this.y);
      this.sprite.setAngle(this.rotationDeg);
      this.sprite.setScale(this.scale);
    }}
  }}

  //function start
  //function end
}}
"#
        ),
        FrameworkId::P5js => format!(
            r#"class {name} {{
  constructor() {{
    //variable start
    this.x = 0;
    this.y = 0;
    this.rotationDeg = 0;
    this.scale = 1;
    //variable end
  }}

  preload() {{
    if (ASSETS.{name}) {{
      this.img = loadImage(ASSETS.{name});
    }}
  }}

  setup() {{
  }}

  update() {{
  }}

  display() {{
    push();
    translate(this.x, this.y);
    rotate(radians(this.rotationDeg));
    scale(this.scale);
    if (this.img) {{
      imageMode(CENTER);
      image(this.img, 0, 0);
    }}
    pop();
  }}

  //function start
  //function end
}}
"#
        ),
    }
}

/// Central script that only instantiates the given element classes and
/// drives their lifecycle hooks.
pub fn central_template(framework: FrameworkId, names: &[&str]) -> String {
    match framework {
        FrameworkId::Phaser => {
            let inst: String = names
                .iter()
                .map(|n| format!("    elements.{n} = new {n}(this);\n"))
                .collect();
            format!(
                r#"const elements = {{}};

class MainScene extends Phaser.Scene {{
  constructor() {{
    super('main');
  }}

  preload() {{
{inst}    for (const el of Object.values(elements)) el.preload();
  }}

  create() {{
    for (const el of Object.values(elements)) el.create();
  }}

  update(time, delta) {{
    for (const el of Object.values(elements)) el.update(time, delta);
  }}
}}

new Phaser.Game({{
  type: Phaser.AUTO,
  width: {CANVAS_WIDTH},
  height: {CANVAS_HEIGHT},
  backgroundColor: '#ffffff',
  parent: 'scene',
  scene: MainScene,
}});
"#
            )
        }
        FrameworkId::P5js => {
            let inst: String = names
                .iter()
                .map(|n| format!("  elements.{n} = new {n}();\n"))
                .collect();
            format!(
                r#"const elements = {{}};

function preload() {{
{inst}  for (const el of Object.values(elements)) el.preload();
}}

function setup() {{
  createCanvas({CANVAS_WIDTH}, {CANVAS_HEIGHT}).parent('scene');
  for (const el of Object.values(elements)) el.setup();
}}

function draw() {{
  background(255);
  for (const el of Object.values(elements)) {{
    el.update();
    el.display();
  }}
}}
"#
            )
        }
    }
}
